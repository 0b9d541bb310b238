//! Environment configuration.
//!
//! | variable | default |
//! |---|---|
//! | `DILIGENCE_LISTEN` | `127.0.0.1:8080` |
//! | `DILIGENCE_ROOT` | `.` (checkout holding `fixtures/`, `data/`) |
//! | `DILIGENCE_COMPANY_DB` | `<root>/data/companies.v1` |
//! | `DILIGENCE_PROVIDER` | `fixture` (or `live`) |
//! | `DILIGENCE_REGISTRY_URL` | unset: an in-process fixture registry is started |
//! | `DILIGENCE_SINK` | `file` (or `sendmail`) |
//! | `DILIGENCE_SENDMAIL` | `sendmail` |
//! | `DILIGENCE_MAIL_FROM` | `diligence@localhost` |
//! | `DILIGENCE_OUT` | `out` |
//!
//! Live mode also reads the `DILIGENCE_LLM_*` variables of the completion client.

use std::net::SocketAddr;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderMode {
    Fixture,
    Live,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SinkConfig {
    FileDrop,
    Sendmail { program: String, from: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub root: PathBuf,
    pub company_db: PathBuf,
    pub provider: ProviderMode,
    pub registry_url: Option<String>,
    pub sink: SinkConfig,
    pub out_dir: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{var}={value:?}: {reason}")]
    Invalid {
        var: &'static str,
        value: String,
        reason: String,
    },
}

fn invalid(var: &'static str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        var,
        value: value.to_string(),
        reason: reason.into(),
    }
}

impl ServiceConfig {
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|key| std::env::var(key).ok())
    }

    pub fn from_lookup(var: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let listen_text = var("DILIGENCE_LISTEN").unwrap_or_else(|| "127.0.0.1:8080".into());
        let listen = listen_text
            .parse()
            .map_err(|e| invalid("DILIGENCE_LISTEN", &listen_text, format!("{e}")))?;
        let root = PathBuf::from(var("DILIGENCE_ROOT").unwrap_or_else(|| ".".into()));
        let company_db = var("DILIGENCE_COMPANY_DB")
            .map(PathBuf::from)
            .unwrap_or_else(|| root.join("data/companies.v1"));
        let provider = match var("DILIGENCE_PROVIDER").as_deref() {
            None | Some("fixture") => ProviderMode::Fixture,
            Some("live") => ProviderMode::Live,
            Some(other) => {
                return Err(invalid(
                    "DILIGENCE_PROVIDER",
                    other,
                    "expected fixture or live",
                ))
            }
        };
        let sink = match var("DILIGENCE_SINK").as_deref() {
            None | Some("file") => SinkConfig::FileDrop,
            Some("sendmail") => SinkConfig::Sendmail {
                program: var("DILIGENCE_SENDMAIL").unwrap_or_else(|| "sendmail".into()),
                from: var("DILIGENCE_MAIL_FROM").unwrap_or_else(|| "diligence@localhost".into()),
            },
            Some(other) => {
                return Err(invalid(
                    "DILIGENCE_SINK",
                    other,
                    "expected file or sendmail",
                ))
            }
        };
        Ok(Self {
            listen,
            root,
            company_db,
            provider,
            registry_url: var("DILIGENCE_REGISTRY_URL").filter(|u| !u.is_empty()),
            sink,
            out_dir: PathBuf::from(var("DILIGENCE_OUT").unwrap_or_else(|| "out".into())),
        })
    }
}
