//! Versioned prompt templates with a per-role input manifest.
//!
//! Templates use `{{path}}` placeholders. A path's first segment names an
//! input artifact; further dotted segments index into it (array positions are
//! numeric segments). `{{top_sources}}` expands to the names of the first
//! `top_k` sources in the `source_map` input.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::Deserialize;
use serde_json::Value;

use super::AgentRole;

pub const TOP_SOURCES: &str = "top_sources";
pub const SOURCE_MAP_INPUT: &str = "source_map";

static PLACEHOLDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\{\{\s*([A-Za-z0-9_.]+)\s*\}\}").expect("valid pattern"));

const BUNDLED_MANIFEST: &str = include_str!("../../../../prompts/v1/manifest.json");

const BUNDLED_TEMPLATES: &[(&str, &str)] = &[
    (
        "context_agent.txt",
        include_str!("../../../../prompts/v1/context_agent.txt"),
    ),
    (
        "source_mapper.txt",
        include_str!("../../../../prompts/v1/source_mapper.txt"),
    ),
    (
        "sector.txt",
        include_str!("../../../../prompts/v1/sector.txt"),
    ),
    (
        "competition.txt",
        include_str!("../../../../prompts/v1/competition.txt"),
    ),
    ("news.txt", include_str!("../../../../prompts/v1/news.txt")),
    (
        "signals.txt",
        include_str!("../../../../prompts/v1/signals.txt"),
    ),
    (
        "researcher.txt",
        include_str!("../../../../prompts/v1/researcher.txt"),
    ),
    (
        "analyst.txt",
        include_str!("../../../../prompts/v1/analyst.txt"),
    ),
    (
        "overall_info.txt",
        include_str!("../../../../prompts/v1/overall_info.txt"),
    ),
    (
        "fin_summary.txt",
        include_str!("../../../../prompts/v1/fin_summary.txt"),
    ),
    (
        "mod_summary.txt",
        include_str!("../../../../prompts/v1/mod_summary.txt"),
    ),
    (
        "alt_financials.txt",
        include_str!("../../../../prompts/v1/alt_financials.txt"),
    ),
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("prompt manifest: {0}")]
    Manifest(String),
    #[error("no prompt registered for role {0}")]
    UnknownRole(String),
    #[error("template {template}: {message}")]
    Template { template: String, message: String },
    #[error("missing input artifact {0:?}")]
    MissingInput(String),
    #[error("placeholder {{{{{0}}}}} does not resolve")]
    Unresolved(String),
}

#[derive(Debug, Deserialize)]
struct Manifest {
    version: String,
    top_k: usize,
    roles: BTreeMap<String, ManifestEntry>,
}

#[derive(Debug, Deserialize)]
struct ManifestEntry {
    template: String,
    inputs: Vec<String>,
    #[serde(default)]
    queries: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RolePrompt {
    pub template: String,
    pub inputs: Vec<String>,
    pub queries: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub prompt: String,
    pub queries: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct PromptLibrary {
    version: String,
    top_k: usize,
    roles: BTreeMap<AgentRole, RolePrompt>,
}

impl PromptLibrary {
    /// The templates compiled into the binary.
    pub fn bundled() -> Self {
        let templates: BTreeMap<String, String> = BUNDLED_TEMPLATES
            .iter()
            .map(|(name, body)| (name.to_string(), body.to_string()))
            .collect();
        Self::from_parts(BUNDLED_MANIFEST, &templates).expect("bundled prompts are valid")
    }

    /// Loads `manifest.json` and the templates it names from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let manifest = std::fs::read_to_string(dir.join("manifest.json"))
            .map_err(|e| PromptError::Manifest(format!("{}: {e}", dir.display())))?;
        let parsed: Manifest =
            serde_json::from_str(&manifest).map_err(|e| PromptError::Manifest(e.to_string()))?;
        let mut templates = BTreeMap::new();
        for entry in parsed.roles.values() {
            let body = std::fs::read_to_string(dir.join(&entry.template)).map_err(|e| {
                PromptError::Template {
                    template: entry.template.clone(),
                    message: e.to_string(),
                }
            })?;
            templates.insert(entry.template.clone(), body);
        }
        Self::from_parts(&manifest, &templates)
    }

    pub fn from_parts(
        manifest: &str,
        templates: &BTreeMap<String, String>,
    ) -> Result<Self, PromptError> {
        let manifest: Manifest =
            serde_json::from_str(manifest).map_err(|e| PromptError::Manifest(e.to_string()))?;
        if manifest.top_k == 0 {
            return Err(PromptError::Manifest("top_k must be at least 1".into()));
        }
        let mut roles = BTreeMap::new();
        for (slug, entry) in manifest.roles {
            let role = AgentRole::from_slug(&slug)
                .ok_or_else(|| PromptError::UnknownRole(slug.clone()))?;
            let template = templates
                .get(&entry.template)
                .ok_or_else(|| PromptError::Template {
                    template: entry.template.clone(),
                    message: "file not found".into(),
                })?;
            for text in std::iter::once(template).chain(entry.queries.iter()) {
                for root in placeholder_roots(text) {
                    let declared = if root == TOP_SOURCES {
                        entry.inputs.iter().any(|i| i == SOURCE_MAP_INPUT)
                    } else {
                        entry.inputs.contains(&root)
                    };
                    if !declared {
                        return Err(PromptError::Template {
                            template: entry.template.clone(),
                            message: format!("placeholder root {root:?} is not a declared input"),
                        });
                    }
                }
            }
            roles.insert(
                role,
                RolePrompt {
                    template: template.clone(),
                    inputs: entry.inputs,
                    queries: entry.queries,
                },
            );
        }
        if let Some(missing) = AgentRole::ALL.iter().find(|r| !roles.contains_key(r)) {
            return Err(PromptError::UnknownRole(format!(
                "{missing} has no manifest entry"
            )));
        }
        Ok(Self {
            version: manifest.version,
            top_k: manifest.top_k,
            roles,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn top_k(&self) -> usize {
        self.top_k
    }

    pub fn role(&self, role: AgentRole) -> &RolePrompt {
        &self.roles[&role]
    }

    pub fn render(
        &self,
        role: AgentRole,
        inputs: &BTreeMap<String, Value>,
    ) -> Result<RenderedPrompt, PromptError> {
        let spec = self.role(role);
        for name in &spec.inputs {
            if !inputs.contains_key(name) {
                return Err(PromptError::MissingInput(name.clone()));
            }
        }
        let prompt = self.fill(&spec.template, inputs)?;
        let queries = self.queries(role, inputs)?;
        Ok(RenderedPrompt { prompt, queries })
    }

    /// Renders only a role's retrieval queries; inputs the queries do not
    /// mention may be absent.
    pub fn queries(
        &self,
        role: AgentRole,
        inputs: &BTreeMap<String, Value>,
    ) -> Result<Vec<String>, PromptError> {
        self.role(role)
            .queries
            .iter()
            .map(|q| self.fill(q, inputs).map(|s| s.trim().to_string()))
            .collect()
    }

    fn fill(&self, text: &str, inputs: &BTreeMap<String, Value>) -> Result<String, PromptError> {
        let mut out = String::with_capacity(text.len());
        let mut last = 0;
        for caps in PLACEHOLDER.captures_iter(text) {
            let whole = caps.get(0).expect("match");
            let path = &caps[1];
            out.push_str(&text[last..whole.start()]);
            out.push_str(&self.resolve(path, inputs)?);
            last = whole.end();
        }
        out.push_str(&text[last..]);
        Ok(out)
    }

    fn resolve(&self, path: &str, inputs: &BTreeMap<String, Value>) -> Result<String, PromptError> {
        if path == TOP_SOURCES {
            return top_sources(inputs, self.top_k)
                .ok_or_else(|| PromptError::Unresolved(path.into()));
        }
        let mut segments = path.split('.');
        let root = segments.next().unwrap_or_default();
        let mut value = inputs
            .get(root)
            .ok_or_else(|| PromptError::MissingInput(root.into()))?;
        for seg in segments {
            value = match value {
                Value::Object(map) => map.get(seg),
                Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get(i)),
                _ => None,
            }
            .ok_or_else(|| PromptError::Unresolved(path.into()))?;
        }
        Ok(match value {
            Value::String(s) => s.clone(),
            Value::Array(items) if items.iter().all(Value::is_string) => items
                .iter()
                .filter_map(Value::as_str)
                .collect::<Vec<_>>()
                .join(", "),
            other => other.to_string(),
        })
    }
}

fn top_sources(inputs: &BTreeMap<String, Value>, k: usize) -> Option<String> {
    let map = inputs.get(SOURCE_MAP_INPUT)?;
    let sources = map
        .pointer("/payload/sources")
        .or_else(|| map.get("sources"))?
        .as_array()?;
    let names: Vec<&str> = sources
        .iter()
        .take(k)
        .filter_map(|s| s.get("name").and_then(Value::as_str))
        .collect();
    Some(names.join("; "))
}

fn placeholder_roots(text: &str) -> Vec<String> {
    PLACEHOLDER
        .captures_iter(text)
        .map(|c| c[1].split('.').next().unwrap_or_default().to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn bundled_library_covers_every_role() {
        let lib = PromptLibrary::bundled();
        assert_eq!(lib.version(), "v1");
        assert_eq!(lib.top_k(), 5);
        for role in AgentRole::ALL {
            assert!(!lib.role(role).template.is_empty(), "{role}");
        }
    }

    #[test]
    fn renders_paths_and_top_sources() {
        let lib = PromptLibrary::bundled();
        let sources: Vec<Value> = (1..=7)
            .map(|i| json!({"name": format!("S{i}"), "url": "u", "rationale": "r"}))
            .collect();
        let inputs = BTreeMap::from([
            (
                "company".to_string(),
                json!({"name": "Acme", "sector": "Robotics", "headquarters": "Athens, Greece"}),
            ),
            (
                "profile".to_string(),
                json!({"payload": {"summary": "Acme builds robots."}}),
            ),
            (
                "source_map".to_string(),
                json!({"payload": {"sources": sources}}),
            ),
        ]);
        let rendered = lib.render(AgentRole::Sector, &inputs).unwrap();
        assert!(rendered.prompt.contains("Robotics"));
        assert!(rendered
            .queries
            .iter()
            .any(|q| q.contains("S1; S2; S3; S4; S5")));
        assert!(!rendered.queries.iter().any(|q| q.contains("S6")));
    }

    #[test]
    fn missing_input_is_reported() {
        let lib = PromptLibrary::bundled();
        let err = lib
            .render(AgentRole::Analyst, &BTreeMap::new())
            .unwrap_err();
        assert!(matches!(err, PromptError::MissingInput(_)));
    }

    #[test]
    fn undeclared_placeholder_rejected() {
        let manifest = r#"{"version":"t","top_k":5,"roles":{"sector":{"template":"s.txt","inputs":["company"]}}}"#;
        let templates = BTreeMap::from([("s.txt".to_string(), "{{secret.value}}".to_string())]);
        assert!(matches!(
            PromptLibrary::from_parts(manifest, &templates),
            Err(PromptError::Template { .. })
        ));
    }
}
