//! Completion providers: the deterministic fixture stub, record/replay
//! adapters, and an optional OpenAI-compatible HTTP adapter.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{AgentRole, ContextDocument};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRequest {
    pub role: AgentRole,
    /// Company the run is about; fixture providers key on it.
    pub subject: String,
    pub prompt: String,
    pub context_documents: Vec<ContextDocument>,
    pub inputs: BTreeMap<String, Value>,
    pub attempt: u32,
    /// Schema feedback from a rejected previous attempt.
    pub feedback: Option<String>,
}

impl CompletionRequest {
    pub fn key(&self) -> String {
        let canonical = serde_json::to_value(self).expect("request serializes");
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("{0}")]
    Other(String),
}

#[async_trait]
pub trait CompletionProvider: Send + Sync {
    /// Stable identity folded into output fingerprints.
    fn identity(&self) -> String;
    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError>;
}

/// Canned completions read from `<root>/<subject>/<role>.json`, falling back
/// to `<root>/_default/<role>.json`. The context agent falls back further to
/// echoing the company record.
///
/// A fixture file holds either one completion object or
/// `{"attempts": [...]}`, in which case attempt `n` gets entry `n-1` (the
/// last entry repeats).
#[derive(Debug, Clone)]
pub struct FixtureCompletionProvider {
    source: FixtureSource,
}

#[derive(Debug, Clone)]
enum FixtureSource {
    Dir(PathBuf),
    Memory(Arc<HashMap<(String, AgentRole), Value>>),
}

pub const DEFAULT_SUBJECT: &str = "_default";

impl FixtureCompletionProvider {
    pub fn from_dir(root: impl Into<PathBuf>) -> Self {
        Self {
            source: FixtureSource::Dir(root.into()),
        }
    }

    /// In-memory fixtures keyed by (subject, role).
    pub fn from_map(entries: HashMap<(String, AgentRole), Value>) -> Self {
        Self {
            source: FixtureSource::Memory(Arc::new(entries)),
        }
    }

    fn lookup(&self, subject: &str, role: AgentRole) -> Result<Option<Value>, ProviderError> {
        match &self.source {
            FixtureSource::Memory(map) => Ok(map
                .get(&(subject.to_string(), role))
                .or_else(|| map.get(&(DEFAULT_SUBJECT.to_string(), role)))
                .cloned()),
            FixtureSource::Dir(root) => {
                for dir in [subject, DEFAULT_SUBJECT] {
                    let path = root.join(dir).join(format!("{}.json", role.slug()));
                    match std::fs::read_to_string(&path) {
                        Ok(text) => {
                            let value = serde_json::from_str(&text).map_err(|e| {
                                ProviderError::Other(format!("{}: {e}", path.display()))
                            })?;
                            return Ok(Some(value));
                        }
                        Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
                        Err(e) => {
                            return Err(ProviderError::Other(format!("{}: {e}", path.display())))
                        }
                    }
                }
                Ok(None)
            }
        }
    }
}

#[async_trait]
impl CompletionProvider for FixtureCompletionProvider {
    fn identity(&self) -> String {
        "fixture-stub/v1".to_string()
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let fixture = match self.lookup(&request.subject, request.role)? {
            Some(v) => v,
            None if request.role == AgentRole::ContextAgent => echo_profile(request)?,
            None => {
                return Err(ProviderError::Other(format!(
                    "no fixture completion for {}/{}",
                    request.subject, request.role
                )))
            }
        };
        let chosen = match fixture.get("attempts").and_then(Value::as_array) {
            Some(attempts) if !attempts.is_empty() => {
                let i = (request.attempt as usize)
                    .saturating_sub(1)
                    .min(attempts.len() - 1);
                attempts[i].clone()
            }
            _ => fixture,
        };
        Ok(match chosen {
            Value::String(raw) => raw,
            other => other.to_string(),
        })
    }
}

/// Profile built only from record fields.
fn echo_profile(request: &CompletionRequest) -> Result<Value, ProviderError> {
    let company = request
        .inputs
        .get("company")
        .ok_or_else(|| ProviderError::Other("echo profile needs a company input".into()))?;
    let field = |k: &str| {
        company
            .get(k)
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string()
    };
    let mut facts = vec![
        json!({"attribute": "name", "value": field("name")}),
        json!({"attribute": "sector", "value": field("sector")}),
        json!({"attribute": "initial_investment_year",
               "value": company.get("initial_investment_year").map(|y| y.to_string()).unwrap_or_default()}),
        json!({"attribute": "headquarters", "value": field("headquarters")}),
    ];
    for founder in company
        .get("founders")
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
    {
        facts.push(json!({"attribute": "founder", "value": founder}));
    }
    if let Some(reg) = company.get("registration").and_then(Value::as_str) {
        facts.push(json!({"attribute": "registration", "value": reg}));
    }
    let summary = format!(
        "{} is a {} company headquartered in {}.",
        field("name"),
        field("sector"),
        field("headquarters")
    );
    Ok(json!({"payload": {"summary": summary, "anchor_facts": facts}, "citations": []}))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RecordedCompletion {
    key: String,
    role: AgentRole,
    subject: String,
    attempt: u32,
    completion: String,
}

/// Replays completions recorded by [`RecordingProvider`], keyed by request hash.
#[derive(Debug, Clone)]
pub struct ReplayProvider {
    entries: Arc<HashMap<String, String>>,
}

impl ReplayProvider {
    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Other(format!("{}: {e}", path.display())))?;
        let mut entries = HashMap::new();
        for (i, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let rec: RecordedCompletion = serde_json::from_str(line)
                .map_err(|e| ProviderError::Other(format!("{}:{}: {e}", path.display(), i + 1)))?;
            entries.insert(rec.key, rec.completion);
        }
        Ok(Self {
            entries: Arc::new(entries),
        })
    }
}

#[async_trait]
impl CompletionProvider for ReplayProvider {
    fn identity(&self) -> String {
        "replay/v1".to_string()
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        self.entries.get(&request.key()).cloned().ok_or_else(|| {
            ProviderError::Other(format!(
                "no recorded completion for {}/{} attempt {}",
                request.subject, request.role, request.attempt
            ))
        })
    }
}

/// Wraps another provider and appends every completion to a JSONL file.
pub struct RecordingProvider {
    inner: Arc<dyn CompletionProvider>,
    log: Mutex<std::fs::File>,
}

impl RecordingProvider {
    pub fn new(inner: Arc<dyn CompletionProvider>, path: &Path) -> Result<Self, ProviderError> {
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| ProviderError::Other(format!("{}: {e}", path.display())))?;
        Ok(Self {
            inner,
            log: Mutex::new(file),
        })
    }
}

#[async_trait]
impl CompletionProvider for RecordingProvider {
    // Replays must fingerprint like the original provider.
    fn identity(&self) -> String {
        self.inner.identity()
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let completion = self.inner.complete(request).await?;
        let line = serde_json::to_string(&RecordedCompletion {
            key: request.key(),
            role: request.role,
            subject: request.subject.clone(),
            attempt: request.attempt,
            completion: completion.clone(),
        })
        .expect("record serializes");
        let mut file = self.log.lock().expect("recording log lock");
        writeln!(file, "{line}").map_err(|e| ProviderError::Other(format!("recording: {e}")))?;
        Ok(completion)
    }
}

/// OpenAI-compatible chat-completions client, temperature 0.
#[derive(Debug, Clone)]
pub struct HttpCompletionProvider {
    client: reqwest::Client,
    base_url: String,
    api_key: Option<String>,
    model: String,
}

impl HttpCompletionProvider {
    pub fn new(
        base_url: impl Into<String>,
        api_key: Option<String>,
        model: impl Into<String>,
    ) -> Self {
        Self {
            client: reqwest::Client::new(),
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            model: model.into(),
        }
    }

    /// Reads `DILIGENCE_LLM_BASE_URL`, `DILIGENCE_LLM_API_KEY` and
    /// `DILIGENCE_LLM_MODEL`. Returns `None` when no base URL is set.
    pub fn from_env() -> Option<Self> {
        let base = std::env::var("DILIGENCE_LLM_BASE_URL").ok()?;
        let key = std::env::var("DILIGENCE_LLM_API_KEY").ok();
        let model =
            std::env::var("DILIGENCE_LLM_MODEL").unwrap_or_else(|_| "gpt-4o-mini".to_string());
        Some(Self::new(base, key, model))
    }

    fn body(&self, request: &CompletionRequest) -> Value {
        let mut system = "Answer only with a single JSON object of the form \
                          {\"payload\": ..., \"citations\": [...]}. Cite sources by index."
            .to_string();
        if let Some(feedback) = &request.feedback {
            system.push('\n');
            system.push_str(feedback);
        }
        let context =
            serde_json::to_string(&request.context_documents).expect("context serializes");
        json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": format!("{}\n\nContext sources:\n{context}", request.prompt)},
            ],
        })
    }
}

#[async_trait]
impl CompletionProvider for HttpCompletionProvider {
    fn identity(&self) -> String {
        format!("openai-compatible/{}@{}", self.model, self.base_url)
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let mut call = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .json(&self.body(request));
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let response = call
            .send()
            .await
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() {
            return Err(ProviderError::Transport(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(ProviderError::Other(format!("HTTP {status}")));
        }
        let body: Value = response
            .json()
            .await
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        body.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| {
                ProviderError::Other("response has no choices[0].message.content".into())
            })
    }
}
