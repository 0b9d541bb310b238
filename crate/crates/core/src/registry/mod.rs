//! Registry portal client: document index, two-stream classification,
//! recency selection and PDF retrieval over a neutral two-endpoint protocol.
//!
//! `GET {base}/index?reg=<number>` returns
//! `{"total": n, "documents": [{doc_id, published_date, title, kind_hint?}]}`
//! and `GET {base}/doc/<doc_id>` returns the document bytes.

mod classify;
mod server;

use std::collections::HashSet;
use std::fmt;
use std::time::Duration;

use async_trait::async_trait;
use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::intake::CompanyRecord;

pub use classify::{classify_documents, ClassificationTable, DocumentClass};
pub use server::{fixture_router, FixtureCorpus, FixtureServer};

pub const BRANCH_YES: &str = "Yes";
pub const BRANCH_NO: &str = "No";
pub const DEFAULT_RECENT: usize = 2;
pub const PDF_MAGIC: &[u8] = b"%PDF-";

/// Registry number: decimal digits only, 6 to 15 of them.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ArGemi(String);

impl ArGemi {
    pub fn parse(raw: &str) -> Result<Self, RegistryError> {
        let ok = (6..=15).contains(&raw.len()) && raw.bytes().all(|b| b.is_ascii_digit());
        if ok {
            Ok(Self(raw.to_string()))
        } else {
            Err(RegistryError::InvalidArGemi(raw.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ArGemi {
    type Error = RegistryError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::parse(&value)
    }
}

impl From<ArGemi> for String {
    fn from(value: ArGemi) -> Self {
        value.0
    }
}

impl fmt::Display for ArGemi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Router predicate for the registry branch.
pub fn has_valid_registry_number(record: &CompanyRecord) -> &'static str {
    match record.registration.as_deref().map(ArGemi::parse) {
        Some(Ok(_)) => BRANCH_YES,
        _ => BRANCH_NO,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentIndexEntry {
    pub doc_id: String,
    pub published_date: NaiveDate,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind_hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentIndex {
    pub entries: Vec<DocumentIndexEntry>,
    /// Item count the portal declared.
    pub total: usize,
    /// The portal declared more items than it returned.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PdfBlob {
    pub doc_id: String,
    #[serde(with = "base64_bytes")]
    pub bytes: Vec<u8>,
    pub content_hash: String,
    pub retrieved_at: DateTime<Utc>,
}

impl PdfBlob {
    pub fn new(
        doc_id: impl Into<String>,
        bytes: Vec<u8>,
        retrieved_at: DateTime<Utc>,
    ) -> Result<Self, RegistryError> {
        let doc_id = doc_id.into();
        if bytes.is_empty() || !bytes.starts_with(PDF_MAGIC) {
            return Err(RegistryError::NotPdf(doc_id));
        }
        let content_hash = sha256_hex(&bytes);
        Ok(Self {
            doc_id,
            bytes,
            content_hash,
            retrieved_at,
        })
    }
}

mod base64_bytes {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text).map_err(serde::de::Error::custom)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("invalid registry number {0:?}")]
    InvalidArGemi(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("malformed index payload: {0}")]
    Malformed(String),
    #[error("document {0} is not a PDF")]
    NotPdf(String),
}

impl RegistryError {
    /// Transport-class failures are retried once by the engine.
    pub fn is_transport(&self) -> bool {
        matches!(
            self,
            RegistryError::Transport(_) | RegistryError::NotFound(_)
        )
    }
}

/// Raw access to the two registry endpoints.
#[async_trait]
pub trait RegistryClient: Send + Sync {
    async fn index(&self, registration: &ArGemi) -> Result<Vec<u8>, RegistryError>;
    async fn document(&self, doc_id: &str) -> Result<Vec<u8>, RegistryError>;
}

#[derive(Debug, Deserialize)]
struct IndexPayload {
    total: Option<usize>,
    documents: Vec<DocumentIndexEntry>,
}

pub fn parse_index(bytes: &[u8]) -> Result<DocumentIndex, RegistryError> {
    let payload: IndexPayload =
        serde_json::from_slice(bytes).map_err(|e| RegistryError::Malformed(e.to_string()))?;
    let mut seen = HashSet::new();
    for entry in &payload.documents {
        if entry.doc_id.trim().is_empty() {
            return Err(RegistryError::Malformed("empty doc_id".into()));
        }
        if !seen.insert(entry.doc_id.as_str()) {
            return Err(RegistryError::Malformed(format!(
                "duplicate doc_id {}",
                entry.doc_id
            )));
        }
    }
    let returned = payload.documents.len();
    let total = payload.total.unwrap_or(returned);
    Ok(DocumentIndex {
        entries: payload.documents,
        total,
        truncated: total > returned,
    })
}

pub async fn fetch_document_index(
    registration: &ArGemi,
    client: &dyn RegistryClient,
) -> Result<DocumentIndex, RegistryError> {
    parse_index(&client.index(registration).await?)
}

pub async fn fetch_pdf(
    doc_id: &str,
    client: &dyn RegistryClient,
    retrieved_at: DateTime<Utc>,
) -> Result<PdfBlob, RegistryError> {
    let bytes = client.document(doc_id).await?;
    PdfBlob::new(doc_id, bytes, retrieved_at)
}

/// Newest first, ties by doc_id ascending, at most `n`.
pub fn select_recent(financials: &[DocumentIndexEntry], n: usize) -> Vec<DocumentIndexEntry> {
    let mut sorted = financials.to_vec();
    sorted.sort_by(|a, b| {
        b.published_date
            .cmp(&a.published_date)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    sorted.truncate(n);
    sorted
}

/// HTTP implementation of [`RegistryClient`].
#[derive(Debug, Clone)]
pub struct HttpRegistryClient {
    client: reqwest::Client,
    base_url: String,
    headers: Vec<(String, String)>,
}

impl HttpRegistryClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(10))
            .build()
            .expect("http client");
        Self {
            client,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            headers: Vec::new(),
        }
    }

    pub fn with_header(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.headers.push((name.into(), value.into()));
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    async fn get(&self, url: String, what: &str) -> Result<Vec<u8>, RegistryError> {
        let mut request = self.client.get(&url);
        for (k, v) in &self.headers {
            request = request.header(k, v);
        }
        let response = request
            .send()
            .await
            .map_err(|e| RegistryError::Transport(e.to_string()))?;
        let status = response.status();
        if status == reqwest::StatusCode::NOT_FOUND {
            return Err(RegistryError::NotFound(what.to_string()));
        }
        if !status.is_success() {
            return Err(RegistryError::Transport(format!(
                "HTTP {status} for {what}"
            )));
        }
        let body = response
            .bytes()
            .await
            .map_err(|e| RegistryError::Transport(e.to_string()))?;
        Ok(body.to_vec())
    }
}

#[async_trait]
impl RegistryClient for HttpRegistryClient {
    async fn index(&self, registration: &ArGemi) -> Result<Vec<u8>, RegistryError> {
        let url = format!("{}/index?reg={}", self.base_url, registration);
        self.get(url, &format!("index for {registration}")).await
    }

    async fn document(&self, doc_id: &str) -> Result<Vec<u8>, RegistryError> {
        let url = format!("{}/doc/{}", self.base_url, doc_id);
        self.get(url, &format!("document {doc_id}")).await
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(reg: Option<&str>) -> CompanyRecord {
        CompanyRecord {
            company_id: "x".into(),
            name: "X".into(),
            founders: vec![],
            sector: "s".into(),
            initial_investment_year: 2020,
            headquarters: "h".into(),
            registration: reg.map(str::to_string),
            alt_identifiers: None,
        }
    }

    fn entry(id: &str, date: &str) -> DocumentIndexEntry {
        DocumentIndexEntry {
            doc_id: id.into(),
            published_date: date.parse().unwrap(),
            title: String::new(),
            kind_hint: None,
        }
    }

    #[test]
    fn router_predicate() {
        assert_eq!(
            has_valid_registry_number(&record(Some("123456789012"))),
            BRANCH_YES
        );
        assert_eq!(has_valid_registry_number(&record(None)), BRANCH_NO);
        assert_eq!(
            has_valid_registry_number(&record(Some("12AB34"))),
            BRANCH_NO
        );
        assert_eq!(has_valid_registry_number(&record(Some("12345"))), BRANCH_NO);
        assert_eq!(
            has_valid_registry_number(&record(Some("1234567890123456"))),
            BRANCH_NO
        );
    }

    #[test]
    fn select_recent_sorts_and_truncates() {
        let picked = select_recent(
            &[
                entry("x", "2021-06-30"),
                entry("y", "2023-06-30"),
                entry("z", "2022-06-30"),
            ],
            2,
        );
        let dates: Vec<String> = picked
            .iter()
            .map(|e| e.published_date.to_string())
            .collect();
        assert_eq!(dates, vec!["2023-06-30", "2022-06-30"]);

        let tie = select_recent(&[entry("b", "2023-01-01"), entry("a", "2023-01-01")], 2);
        assert_eq!(tie[0].doc_id, "a");
        assert!(select_recent(&[], 2).is_empty());
    }

    #[test]
    fn index_parsing() {
        let ok = br#"{"total": 3, "documents": [
            {"doc_id": "a", "published_date": "2023-01-01", "title": "t"},
            {"doc_id": "b", "published_date": "2023-01-02", "title": "t", "kind_hint": "k"}]}"#;
        let idx = parse_index(ok).unwrap();
        assert_eq!(idx.entries.len(), 2);
        assert!(idx.truncated);

        let dup = br#"{"documents": [
            {"doc_id": "a", "published_date": "2023-01-01", "title": "t"},
            {"doc_id": "a", "published_date": "2023-01-02", "title": "t"}]}"#;
        assert!(matches!(parse_index(dup), Err(RegistryError::Malformed(_))));
        assert!(matches!(
            parse_index(b"<html>"),
            Err(RegistryError::Malformed(_))
        ));
        let bad_date =
            br#"{"documents": [{"doc_id": "a", "published_date": "2023-13-01", "title": "t"}]}"#;
        assert!(parse_index(bad_date).is_err());
    }

    #[test]
    fn pdf_magic_checked() {
        let now = Utc::now();
        assert!(PdfBlob::new("d", b"%PDF-1.7\n".to_vec(), now).is_ok());
        assert_eq!(
            PdfBlob::new("d", b"<html>error</html>".to_vec(), now),
            Err(RegistryError::NotPdf("d".into()))
        );
        assert!(PdfBlob::new("d", vec![], now).is_err());
    }

    #[test]
    fn blob_serde_round_trip() {
        let blob = PdfBlob::new("d", b"%PDF-1.4 body".to_vec(), Utc::now()).unwrap();
        let back: PdfBlob = serde_json::from_str(&serde_json::to_string(&blob).unwrap()).unwrap();
        assert_eq!(back, blob);
    }
}
