//! Three-state financial section: registry-verified figures, a labelled
//! third-party approximation, or an explicit not-found flag.

use std::path::Path;
use std::sync::Arc;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::agents::schema::AltFinancialsPayload;
use crate::agents::{validate_output, AgentCandidate, AgentRole, Citation, CitationDraft};
use crate::extract::{CorporateEvent, FinancialStatementRecord};
use crate::intake::CompanyRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EpistemicState {
    RegistryVerified,
    ThirdPartyApprox,
    NotFound,
}

impl EpistemicState {
    /// Value of the report's `data-state` attribute.
    pub fn marker(self) -> &'static str {
        match self {
            EpistemicState::RegistryVerified => "registry-verified",
            EpistemicState::ThirdPartyApprox => "third-party",
            EpistemicState::NotFound => "not-found",
        }
    }
}

/// What the registry branch produced, if it ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RegistryOutcome {
    NotAttempted,
    Success {
        records: Vec<FinancialStatementRecord>,
        events: Vec<CorporateEvent>,
    },
    Empty,
    Failed {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThirdPartyField {
    pub name: String,
    pub value: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    /// Index into the entry's citations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citation: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThirdPartyEntry {
    pub provider: String,
    pub fields: Vec<ThirdPartyField>,
    pub citations: Vec<Citation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinancialSection {
    pub state: EpistemicState,
    pub registry_records: Vec<FinancialStatementRecord>,
    pub corporate_events: Vec<CorporateEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub third_party: Option<ThirdPartyEntry>,
    pub provenance_note: String,
}

impl FinancialSection {
    /// Checks that exactly the payload matching `state` is populated.
    pub fn validate(&self) -> Result<(), String> {
        let records = !self.registry_records.is_empty();
        let events = !self.corporate_events.is_empty();
        let third = self.third_party.is_some();
        match self.state {
            EpistemicState::RegistryVerified if !records => {
                Err("registry-verified section without records".into())
            }
            EpistemicState::RegistryVerified if third => {
                Err("registry-verified section with third-party entry".into())
            }
            EpistemicState::ThirdPartyApprox if !third => {
                Err("third-party section without entry".into())
            }
            EpistemicState::ThirdPartyApprox if records || events => {
                Err("third-party section carries registry payload".into())
            }
            EpistemicState::NotFound if records || events || third => {
                Err("not-found section carries payload".into())
            }
            _ if self.provenance_note.chars().any(|c| c.is_ascii_digit()) => {
                Err("provenance note contains digits".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AltError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("{0}")]
    Other(String),
}

/// A provider entry before validation: the alt-financials payload plus its
/// citation drafts and the time the provider was queried.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltCandidate {
    pub payload: Value,
    pub citations: Vec<CitationDraft>,
    pub retrieved_at: DateTime<Utc>,
}

#[async_trait]
pub trait AltFinancialsProvider: Send + Sync {
    fn name(&self) -> &str;
    async fn lookup(&self, record: &CompanyRecord) -> Result<Option<AltCandidate>, AltError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltLookup {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hit: Option<ThirdPartyEntry>,
    /// Digit-free notes on misses, rejections and errors.
    pub notes: Vec<String>,
}

/// Removes digits so provenance text can never carry a figure.
fn digit_free(text: &str) -> String {
    text.chars().filter(|c| !c.is_ascii_digit()).collect()
}

/// Queries one provider with a single retry on transport errors. Entries
/// with an uncited numeric field are rejected and count as a miss.
pub async fn query_alt_provider(
    record: &CompanyRecord,
    provider: &dyn AltFinancialsProvider,
) -> AltLookup {
    let name = digit_free(provider.name());
    let mut result = provider.lookup(record).await;
    if let Err(AltError::Transport(cause)) = &result {
        tracing::info!(provider = provider.name(), %cause, "alt provider transport error, retrying");
        result = provider.lookup(record).await;
    }
    let candidate = match result {
        Ok(Some(c)) => c,
        Ok(None) => {
            return AltLookup {
                hit: None,
                notes: vec![format!("{name} has no entry for this company.")],
            }
        }
        Err(AltError::Transport(cause)) => {
            tracing::warn!(provider = provider.name(), %cause, "alt provider unreachable after retry");
            return AltLookup {
                hit: None,
                notes: vec![format!(
                    "{name} was unreachable after a retry ({}).",
                    digit_free(&cause)
                )],
            };
        }
        Err(AltError::Other(cause)) => {
            tracing::warn!(provider = provider.name(), %cause, "alt provider error");
            return AltLookup {
                hit: None,
                notes: vec![format!(
                    "{name} returned an error ({}).",
                    digit_free(&cause)
                )],
            };
        }
    };
    let report = validate_output(
        AgentRole::AltFinancials,
        &AgentCandidate {
            payload: candidate.payload.clone(),
            citations: candidate.citations.clone(),
        },
    );
    if !report.ok {
        tracing::warn!(provider = provider.name(), violations = %report, "alt provider entry rejected");
        return AltLookup {
            hit: None,
            notes: vec![format!(
                "{name} entry rejected: it carried uncited or malformed figures."
            )],
        };
    }
    let payload: AltFinancialsPayload =
        serde_json::from_value(candidate.payload).expect("validated payload");
    let citations = candidate
        .citations
        .into_iter()
        .map(|d| Citation {
            source_ref: d.source_ref,
            page: d.page,
            retrieved_at: candidate.retrieved_at,
            snippet: d.snippet,
        })
        .collect();
    AltLookup {
        hit: Some(ThirdPartyEntry {
            provider: payload.provider,
            fields: payload
                .fields
                .into_iter()
                .map(|f| ThirdPartyField {
                    name: f.name,
                    value: f.value,
                    unit: f.unit,
                    citation: f.citation,
                })
                .collect(),
            citations,
        }),
        notes: Vec::new(),
    }
}

/// Providers tried in order; the first hit wins.
#[derive(Clone, Default)]
pub struct AltChain {
    providers: Vec<Arc<dyn AltFinancialsProvider>>,
}

impl AltChain {
    pub fn new(providers: Vec<Arc<dyn AltFinancialsProvider>>) -> Self {
        Self { providers }
    }

    pub fn names(&self) -> Vec<String> {
        self.providers
            .iter()
            .map(|p| p.name().to_string())
            .collect()
    }

    pub async fn query(&self, record: &CompanyRecord) -> AltLookup {
        let mut notes = Vec::new();
        for provider in &self.providers {
            let lookup = query_alt_provider(record, provider.as_ref()).await;
            notes.extend(lookup.notes);
            if lookup.hit.is_some() {
                return AltLookup {
                    hit: lookup.hit,
                    notes,
                };
            }
        }
        if self.providers.is_empty() {
            notes.push("No third-party provider is configured.".into());
        }
        AltLookup { hit: None, notes }
    }
}

/// Whether the registry outcome alone settles the section.
pub fn registry_suffices(outcome: &RegistryOutcome) -> bool {
    matches!(outcome, RegistryOutcome::Success { records, .. } if !records.is_empty())
}

/// Decision table over the registry outcome and an alt lookup (needed only
/// when the registry does not suffice).
pub fn decide(outcome: RegistryOutcome, alt: Option<AltLookup>) -> FinancialSection {
    let mut note = Vec::new();
    match outcome {
        RegistryOutcome::Success { records, events } if !records.is_empty() => {
            return FinancialSection {
                state: EpistemicState::RegistryVerified,
                registry_records: records,
                corporate_events: events,
                third_party: None,
                provenance_note: "Figures taken from official registry filings; each cell cites the filing and page."
                    .into(),
            };
        }
        RegistryOutcome::Success { .. } | RegistryOutcome::Empty => {
            note.push("A valid registry number was found but the registry returned no usable financial statements.")
        }
        RegistryOutcome::Failed { .. } => {
            note.push("A valid registry number was found but registry retrieval failed.")
        }
        RegistryOutcome::NotAttempted => note.push("No valid registry number; the registry was not queried."),
    }
    let alt = alt.unwrap_or(AltLookup {
        hit: None,
        notes: vec!["No third-party lookup was made.".into()],
    });
    let mut note: Vec<String> = note.into_iter().map(str::to_string).collect();
    note.extend(alt.notes.iter().map(|n| digit_free(n)));
    match alt.hit {
        Some(entry) => {
            note.push(format!(
                "Third-party approximation from {}; not verified against official filings.",
                digit_free(&entry.provider)
            ));
            FinancialSection {
                state: EpistemicState::ThirdPartyApprox,
                registry_records: Vec::new(),
                corporate_events: Vec::new(),
                third_party: Some(entry),
                provenance_note: note.join(" "),
            }
        }
        None => {
            note.push("Financial figures not found.".into());
            FinancialSection {
                state: EpistemicState::NotFound,
                registry_records: Vec::new(),
                corporate_events: Vec::new(),
                third_party: None,
                provenance_note: note.join(" "),
            }
        }
    }
}

pub async fn resolve_financials(
    record: &CompanyRecord,
    outcome: RegistryOutcome,
    alt: &AltChain,
) -> FinancialSection {
    if registry_suffices(&outcome) {
        return decide(outcome, None);
    }
    let lookup = alt.query(record).await;
    decide(outcome, Some(lookup))
}

#[derive(Debug, Clone, Deserialize)]
struct FixtureEntry {
    #[serde(default)]
    alt_id: Option<String>,
    #[serde(default)]
    name: Option<String>,
    fields: Value,
    #[serde(default)]
    citations: Vec<CitationDraft>,
}

#[derive(Debug, Clone, Deserialize)]
struct FixtureFile {
    provider: String,
    /// Key into a company's `alt_identifiers` map.
    identifier_key: String,
    retrieved_at: DateTime<Utc>,
    entries: Vec<FixtureEntry>,
}

/// Alt provider backed by a JSON file; entries match on the company's alt
/// identifier or, failing that, on its normalized name.
#[derive(Debug, Clone)]
pub struct FixtureAltProvider {
    file: FixtureFile,
}

pub fn normalize_name(name: &str) -> String {
    name.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

impl FixtureAltProvider {
    pub fn from_json(text: &str) -> Result<Self, AltError> {
        let file =
            serde_json::from_str(text).map_err(|e| AltError::Other(format!("alt fixture: {e}")))?;
        Ok(Self { file })
    }

    pub fn load(path: &Path) -> Result<Self, AltError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AltError::Other(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[async_trait]
impl AltFinancialsProvider for FixtureAltProvider {
    fn name(&self) -> &str {
        &self.file.provider
    }

    async fn lookup(&self, record: &CompanyRecord) -> Result<Option<AltCandidate>, AltError> {
        let alt_id = record
            .alt_identifiers
            .as_ref()
            .and_then(|ids| ids.get(&self.file.identifier_key));
        let wanted_name = normalize_name(&record.name);
        let entry = self
            .file
            .entries
            .iter()
            .find(|e| alt_id.is_some() && e.alt_id.as_ref() == alt_id)
            .or_else(|| {
                self.file.entries.iter().find(|e| {
                    e.name.as_deref().map(normalize_name).as_deref() == Some(wanted_name.as_str())
                })
            });
        Ok(entry.map(|e| AltCandidate {
            payload: json!({"provider": self.file.provider, "fields": e.fields}),
            citations: e.citations.clone(),
            retrieved_at: self.file.retrieved_at,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn record(name: &str) -> CompanyRecord {
        CompanyRecord {
            company_id: "c".into(),
            name: name.into(),
            founders: vec![],
            sector: "s".into(),
            initial_investment_year: 2020,
            headquarters: "h".into(),
            registration: None,
            alt_identifiers: None,
        }
    }

    fn fixture() -> FixtureAltProvider {
        FixtureAltProvider::from_json(
            r#"{"provider": "crunchbase-fixture", "identifier_key": "crunchbase",
                "retrieved_at": "2024-05-01T00:00:00Z",
                "entries": [
                  {"alt_id": "nordic-drones", "name": "Nordic Drones AS",
                   "fields": [{"name": "Total funding", "value": 4200000, "unit": "EUR", "citation": 0},
                              {"name": "Stage", "value": "Series A"}],
                   "citations": [{"source_ref": "https://crunchbase.example/nordic-drones"}]},
                  {"name": "Sloppy Ltd", "fields": [{"name": "Revenue", "value": 100}], "citations": []}
                ]}"#,
        )
        .unwrap()
    }

    struct Flaky {
        calls: AtomicUsize,
        fail_times: usize,
        inner: FixtureAltProvider,
    }

    #[async_trait]
    impl AltFinancialsProvider for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }
        async fn lookup(&self, record: &CompanyRecord) -> Result<Option<AltCandidate>, AltError> {
            if self.calls.fetch_add(1, Ordering::SeqCst) < self.fail_times {
                return Err(AltError::Transport("connection reset on port 8443".into()));
            }
            self.inner.lookup(record).await
        }
    }

    #[tokio::test]
    async fn name_lookup_hits_and_misses() {
        let p = fixture();
        let hit = query_alt_provider(&record("nordic drones as"), &p).await;
        assert_eq!(hit.hit.unwrap().provider, "crunchbase-fixture");
        let miss = query_alt_provider(&record("Unknown Co"), &p).await;
        assert!(miss.hit.is_none());
    }

    #[tokio::test]
    async fn uncited_numeric_field_rejected() {
        let lookup = query_alt_provider(&record("Sloppy Ltd"), &fixture()).await;
        assert!(lookup.hit.is_none());
        assert!(lookup.notes[0].contains("rejected"));
    }

    #[tokio::test]
    async fn transport_error_retried_once() {
        let once = Flaky {
            calls: AtomicUsize::new(0),
            fail_times: 1,
            inner: fixture(),
        };
        assert!(query_alt_provider(&record("Nordic Drones AS"), &once)
            .await
            .hit
            .is_some());

        let twice = Flaky {
            calls: AtomicUsize::new(0),
            fail_times: 2,
            inner: fixture(),
        };
        let section = resolve_financials(
            &record("Nordic Drones AS"),
            RegistryOutcome::NotAttempted,
            &AltChain::new(vec![Arc::new(twice)]),
        )
        .await;
        assert_eq!(section.state, EpistemicState::NotFound);
        assert!(section.provenance_note.contains("unreachable"));
        assert!(section.provenance_note.contains("connection reset"));
        assert!(section.validate().is_ok());
    }

    #[test]
    fn validate_catches_mixed_payloads() {
        let mut s = decide(RegistryOutcome::Empty, None);
        assert_eq!(s.state, EpistemicState::NotFound);
        assert!(s.validate().is_ok());
        s.third_party = Some(ThirdPartyEntry {
            provider: "p".into(),
            fields: vec![],
            citations: vec![],
        });
        assert!(s.validate().is_err());
    }

    #[test]
    fn markers() {
        assert_eq!(
            EpistemicState::RegistryVerified.marker(),
            "registry-verified"
        );
        assert_eq!(EpistemicState::ThirdPartyApprox.marker(), "third-party");
        assert_eq!(EpistemicState::NotFound.marker(), "not-found");
    }
}
