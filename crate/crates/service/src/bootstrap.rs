//! Turns a [`ServiceConfig`] into a runnable pipeline.

use std::sync::Arc;

use diligence_core::agents::{CompletionProvider, HttpCompletionProvider};
use diligence_core::delivery::{FileDropSink, ReportSink, SendmailSink};
use diligence_core::engine::EngineError;
use diligence_core::intake::{load_company_db, IntakeError};
use diligence_core::pipeline::{Pipeline, SystemClock};
use diligence_core::registry::FixtureServer;
use diligence_core::setup::{FixtureLayout, SetupError};

use crate::config::{ProviderMode, ServiceConfig, SinkConfig};

#[derive(Debug, thiserror::Error)]
pub enum BootError {
    #[error(transparent)]
    Setup(#[from] SetupError),
    #[error(transparent)]
    Intake(#[from] IntakeError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("live provider selected but DILIGENCE_LLM_BASE_URL is not set")]
    NoLiveProvider,
    #[error("fixture registry: {0}")]
    Registry(std::io::Error),
}

/// A pipeline plus the in-process registry it talks to, if one was started.
/// The registry stops when this is dropped.
pub struct Booted {
    pub pipeline: Pipeline,
    pub registry: Option<FixtureServer>,
}

pub async fn boot(config: &ServiceConfig) -> Result<Booted, BootError> {
    let layout = FixtureLayout::new(&config.root);
    let (registry_url, registry) = match &config.registry_url {
        Some(url) => (url.clone(), None),
        None => {
            let server = FixtureServer::start(layout.corpus()?)
                .await
                .map_err(BootError::Registry)?;
            (server.base_url(), Some(server))
        }
    };
    let completion: Arc<dyn CompletionProvider> = match config.provider {
        ProviderMode::Fixture => layout.completion(),
        ProviderMode::Live => {
            Arc::new(HttpCompletionProvider::from_env().ok_or(BootError::NoLiveProvider)?)
        }
    };
    let mut deps = layout.deps_with(completion, &registry_url, &config.out_dir)?;
    deps.companies = Arc::new(load_company_db(&config.company_db)?);
    if config.provider == ProviderMode::Live {
        deps.clock = Arc::new(SystemClock);
    }
    let sink: Arc<dyn ReportSink> = match &config.sink {
        SinkConfig::FileDrop => Arc::new(FileDropSink::new(&config.out_dir)),
        SinkConfig::Sendmail { program, from } => {
            Arc::new(SendmailSink::new(program.clone(), from.clone()))
        }
    };
    deps.sink = sink;
    Ok(Booted {
        pipeline: Pipeline::new(deps)?,
        registry,
    })
}
