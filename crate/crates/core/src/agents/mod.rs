//! Agent roles, citation handling and the runner that turns a completion into
//! a validated [`AgentOutput`].

mod claims;
pub mod prompts;
pub mod provider;
pub mod retrieval;
pub mod schema;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub use claims::{contains_numeral, numeral_tokens, NUMERAL_PATTERN};
pub use prompts::{PromptError, PromptLibrary, RolePrompt};
pub use provider::{
    CompletionProvider, CompletionRequest, FixtureCompletionProvider, HttpCompletionProvider,
    ProviderError, RecordingProvider, ReplayProvider,
};
pub use retrieval::{search, FixtureRetrieval, RetrievalError, RetrievalProvider, SearchResult};
pub use schema::{validate_output, AgentCandidate, CitationDraft, OutputReport, SchemaViolation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgentRole {
    ContextAgent,
    SourceMapper,
    Sector,
    Competition,
    News,
    Signals,
    Researcher,
    Analyst,
    OverallInfo,
    FinSummary,
    ModSummary,
    AltFinancials,
}

impl AgentRole {
    pub const ALL: [AgentRole; 12] = [
        AgentRole::ContextAgent,
        AgentRole::SourceMapper,
        AgentRole::Sector,
        AgentRole::Competition,
        AgentRole::News,
        AgentRole::Signals,
        AgentRole::Researcher,
        AgentRole::Analyst,
        AgentRole::OverallInfo,
        AgentRole::FinSummary,
        AgentRole::ModSummary,
        AgentRole::AltFinancials,
    ];

    /// File-name form used by prompt templates and fixtures.
    pub fn slug(self) -> &'static str {
        match self {
            AgentRole::ContextAgent => "context_agent",
            AgentRole::SourceMapper => "source_mapper",
            AgentRole::Sector => "sector",
            AgentRole::Competition => "competition",
            AgentRole::News => "news",
            AgentRole::Signals => "signals",
            AgentRole::Researcher => "researcher",
            AgentRole::Analyst => "analyst",
            AgentRole::OverallInfo => "overall_info",
            AgentRole::FinSummary => "fin_summary",
            AgentRole::ModSummary => "mod_summary",
            AgentRole::AltFinancials => "alt_financials",
        }
    }

    pub fn from_slug(slug: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.slug() == slug)
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

/// A resolved citation. `retrieved_at` comes from the source it points at,
/// never from the completion.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Citation {
    pub source_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page: Option<u32>,
    pub retrieved_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snippet: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentOutput {
    pub role: AgentRole,
    pub payload: Value,
    pub citations: Vec<Citation>,
    pub provider_fingerprint: String,
}

/// Something an agent may cite: a retrieval hit, a fetched document, or a
/// citation already carried by an upstream artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextDocument {
    pub source_ref: String,
    pub retrieved_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snippet: Option<String>,
    /// Page texts for fetched documents; `None` for web sources.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pages: Option<Vec<String>>,
}

impl ContextDocument {
    pub fn web(result: &SearchResult) -> Self {
        Self {
            source_ref: result.source_ref.clone(),
            retrieved_at: result.retrieved_at,
            snippet: Some(result.snippet.clone()),
            pages: None,
        }
    }

    pub fn is_document(&self) -> bool {
        self.pages.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("{role}: provider transport error: {message}")]
    Transport { role: AgentRole, message: String },
    #[error("{role}: provider error: {message}")]
    Provider { role: AgentRole, message: String },
    #[error("{role}: retrieval failed: {source}")]
    Retrieval {
        role: AgentRole,
        source: RetrievalError,
    },
    #[error("{role}: {source}")]
    Prompt {
        role: AgentRole,
        source: PromptError,
    },
    #[error("{role}: output rejected after re-ask: {report}")]
    InvalidOutput {
        role: AgentRole,
        report: OutputReport,
    },
}

impl AgentError {
    pub fn is_transport(&self) -> bool {
        matches!(
            self,
            AgentError::Transport { .. }
                | AgentError::Retrieval {
                    source: RetrievalError::Transport(_),
                    ..
                }
        )
    }
}

/// Runs agent roles against a completion provider and a retrieval provider.
#[derive(Clone)]
pub struct AgentRunner {
    completion: Arc<dyn CompletionProvider>,
    retrieval: Arc<dyn RetrievalProvider>,
    prompts: Arc<PromptLibrary>,
}

impl AgentRunner {
    pub fn new(
        completion: Arc<dyn CompletionProvider>,
        retrieval: Arc<dyn RetrievalProvider>,
        prompts: Arc<PromptLibrary>,
    ) -> Self {
        Self {
            completion,
            retrieval,
            prompts,
        }
    }

    pub fn prompts(&self) -> &PromptLibrary {
        &self.prompts
    }

    pub async fn run_agent(
        &self,
        role: AgentRole,
        subject: &str,
        inputs: &BTreeMap<String, Value>,
    ) -> Result<AgentOutput, AgentError> {
        self.run_agent_with_documents(role, subject, inputs, Vec::new())
            .await
    }

    /// As [`run_agent`](Self::run_agent), with fetched documents added to the
    /// citable context.
    pub async fn run_agent_with_documents(
        &self,
        role: AgentRole,
        subject: &str,
        inputs: &BTreeMap<String, Value>,
        documents: Vec<ContextDocument>,
    ) -> Result<AgentOutput, AgentError> {
        let rendered = self
            .prompts
            .render(role, inputs)
            .map_err(|source| AgentError::Prompt { role, source })?;

        let mut context = documents;
        for query in &rendered.queries {
            let results = search(query, self.retrieval.as_ref())
                .await
                .map_err(|source| AgentError::Retrieval { role, source })?;
            context.extend(results.iter().map(ContextDocument::web));
        }
        context.extend(upstream_sources(inputs));
        let context = dedup_sources(context);

        let fingerprint = fingerprint(role, inputs, &context, &self.completion.identity());
        let mut request = CompletionRequest {
            role,
            subject: subject.to_string(),
            prompt: rendered.prompt.clone(),
            context_documents: context.clone(),
            inputs: inputs.clone(),
            attempt: 1,
            feedback: None,
        };

        let mut last_report = OutputReport::default();
        for attempt in 1..=2 {
            request.attempt = attempt;
            let text = self
                .completion
                .complete(&request)
                .await
                .map_err(|e| match e {
                    ProviderError::Transport(message) => AgentError::Transport { role, message },
                    ProviderError::Other(message) => AgentError::Provider { role, message },
                })?;
            match accept(role, &text, &context) {
                Ok((payload, citations)) => {
                    return Ok(AgentOutput {
                        role,
                        payload,
                        citations,
                        provider_fingerprint: fingerprint,
                    })
                }
                Err(report) => {
                    tracing::debug!(%role, attempt, violations = %report, "agent output rejected");
                    request.feedback = Some(format!(
                        "The previous answer violated the output schema: {report}. Answer again with valid JSON."
                    ));
                    last_report = report;
                }
            }
        }
        Err(AgentError::InvalidOutput {
            role,
            report: last_report,
        })
    }
}

/// Parses, validates and resolves one completion.
pub fn accept(
    role: AgentRole,
    text: &str,
    context: &[ContextDocument],
) -> Result<(Value, Vec<Citation>), OutputReport> {
    let candidate: AgentCandidate = match serde_json::from_str(text) {
        Ok(c) => c,
        Err(e) => {
            return Err(OutputReport {
                ok: false,
                violations: vec![SchemaViolation {
                    path: "completion".into(),
                    rule: format!("not a valid completion object: {e}"),
                }],
            })
        }
    };
    let mut report = validate_output(role, &candidate);
    let citations = resolve_citations(&candidate.citations, context, &mut report);
    if report.violations.is_empty() {
        Ok((candidate.payload, citations))
    } else {
        report.ok = false;
        Err(report)
    }
}

fn resolve_citations(
    drafts: &[CitationDraft],
    context: &[ContextDocument],
    report: &mut OutputReport,
) -> Vec<Citation> {
    let mut resolved = Vec::with_capacity(drafts.len());
    for (i, draft) in drafts.iter().enumerate() {
        let path = format!("citations[{i}]");
        let Some(source) = context.iter().find(|c| c.source_ref == draft.source_ref) else {
            report.violations.push(SchemaViolation {
                path,
                rule: format!("citation source {:?} was not in context", draft.source_ref),
            });
            continue;
        };
        if source.is_document() && draft.page.is_none() {
            report.violations.push(SchemaViolation {
                path: path.clone(),
                rule: "document citation without page".into(),
            });
        }
        resolved.push(Citation {
            source_ref: draft.source_ref.clone(),
            page: draft.page,
            retrieved_at: source.retrieved_at,
            snippet: draft.snippet.clone(),
        });
    }
    resolved
}

/// Citations already carried by upstream artifacts are citable again.
fn upstream_sources(inputs: &BTreeMap<String, Value>) -> Vec<ContextDocument> {
    let mut found = Vec::new();
    for value in inputs.values() {
        collect_citations(value, &mut found);
    }
    found
}

fn collect_citations(value: &Value, found: &mut Vec<ContextDocument>) {
    match value {
        Value::Object(map) => {
            if let Some(Value::Array(items)) = map.get("citations") {
                for item in items {
                    if let Ok(c) = serde_json::from_value::<Citation>(item.clone()) {
                        found.push(ContextDocument {
                            source_ref: c.source_ref,
                            retrieved_at: c.retrieved_at,
                            snippet: c.snippet,
                            pages: None,
                        });
                    }
                }
            }
            if let Some(single @ Value::Object(_)) = map.get("citation") {
                if let Ok(c) = serde_json::from_value::<Citation>(single.clone()) {
                    found.push(ContextDocument {
                        source_ref: c.source_ref,
                        retrieved_at: c.retrieved_at,
                        snippet: c.snippet,
                        pages: None,
                    });
                }
            }
            for v in map.values() {
                collect_citations(v, found);
            }
        }
        Value::Array(items) => items.iter().for_each(|v| collect_citations(v, found)),
        _ => {}
    }
}

/// Keeps the first occurrence of each source_ref. Documents are listed
/// first, so a fetched document wins over a second-hand mention.
fn dedup_sources(context: Vec<ContextDocument>) -> Vec<ContextDocument> {
    let mut seen = BTreeSet::new();
    context
        .into_iter()
        .filter(|c| seen.insert(c.source_ref.clone()))
        .collect()
}

pub fn fingerprint(
    role: AgentRole,
    inputs: &BTreeMap<String, Value>,
    context: &[ContextDocument],
    provider: &str,
) -> String {
    let canonical = json!({
        "role": role,
        "inputs": inputs,
        "context": context,
        "provider": provider,
    });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}
