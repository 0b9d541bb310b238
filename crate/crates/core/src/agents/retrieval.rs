use std::collections::HashMap;
use std::path::Path;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub source_ref: String,
    pub snippet: String,
    pub retrieved_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RetrievalError {
    #[error("query must not be empty")]
    EmptyQuery,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("retrieval fixture: {0}")]
    Fixture(String),
}

#[async_trait]
pub trait RetrievalProvider: Send + Sync {
    async fn search(&self, query: &str) -> Result<Vec<SearchResult>, RetrievalError>;
}

pub async fn search(
    query: &str,
    provider: &dyn RetrievalProvider,
) -> Result<Vec<SearchResult>, RetrievalError> {
    if query.trim().is_empty() {
        return Err(RetrievalError::EmptyQuery);
    }
    provider.search(query).await
}

pub fn query_key(query: &str) -> String {
    hex::encode(Sha256::digest(query.as_bytes()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureQuery {
    pub query: String,
    pub results: Vec<SearchResult>,
}

/// Canned results keyed by the SHA-256 of the exact query string. Unknown
/// queries return an empty list.
#[derive(Debug, Clone, Default)]
pub struct FixtureRetrieval {
    by_key: HashMap<String, Vec<SearchResult>>,
}

impl FixtureRetrieval {
    pub fn new(entries: impl IntoIterator<Item = FixtureQuery>) -> Self {
        Self {
            by_key: entries
                .into_iter()
                .map(|e| (query_key(&e.query), e.results))
                .collect(),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Reads a JSON list of `{query, results}` entries.
    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RetrievalError::Fixture(format!("{}: {e}", path.display())))?;
        let entries: Vec<FixtureQuery> = serde_json::from_str(&text)
            .map_err(|e| RetrievalError::Fixture(format!("{}: {e}", path.display())))?;
        Ok(Self::new(entries))
    }

    pub fn len(&self) -> usize {
        self.by_key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_key.is_empty()
    }
}

#[async_trait]
impl RetrievalProvider for FixtureRetrieval {
    async fn search(&self, query: &str) -> Result<Vec<SearchResult>, RetrievalError> {
        Ok(self
            .by_key
            .get(&query_key(query))
            .cloned()
            .unwrap_or_default())
    }
}
