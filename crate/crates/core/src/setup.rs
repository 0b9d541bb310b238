//! Assembles pipeline dependencies from the checked-in fixture corpus.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};

use crate::agents::{
    AgentRunner, CompletionProvider, FixtureCompletionProvider, FixtureRetrieval, PromptLibrary,
    RetrievalError, RetrievalProvider,
};
use crate::delivery::{FileDropSink, ReportSink};
use crate::extract::TextLayerExtractor;
use crate::fallback::{AltChain, AltError, AltFinancialsProvider, FixtureAltProvider};
use crate::intake::{load_company_db, CompanyDb, IntakeError};
use crate::pipeline::{Clock, FixedClock, PipelineDeps};
use crate::registry::{
    ClassificationTable, FixtureCorpus, HttpRegistryClient, RegistryError, DEFAULT_RECENT,
};

/// Retrieval timestamp used for registry documents in fixture mode.
pub const FIXTURE_CLOCK: &str = "2024-06-02T08:00:00Z";

#[derive(Debug, thiserror::Error)]
pub enum SetupError {
    #[error(transparent)]
    Intake(#[from] IntakeError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Alt(#[from] AltError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
}

pub fn fixture_clock() -> Arc<dyn Clock> {
    let at: DateTime<Utc> = FIXTURE_CLOCK.parse().expect("valid fixture timestamp");
    Arc::new(FixedClock(at))
}

/// Loads every `*.json` provider file in `dir`, tried in file-name order.
pub fn load_alt_dir(dir: &Path) -> Result<AltChain, SetupError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| SetupError::Io(dir.to_path_buf(), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut providers: Vec<Arc<dyn AltFinancialsProvider>> = Vec::new();
    for file in files {
        providers.push(Arc::new(FixtureAltProvider::load(&file)?));
    }
    Ok(AltChain::new(providers))
}

/// Paths of the fixture corpus, rooted at the repository checkout.
#[derive(Debug, Clone)]
pub struct FixtureLayout {
    pub root: PathBuf,
}

impl FixtureLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    /// The repository this crate was built from.
    pub fn repo() -> Self {
        Self::new(Path::new(env!("CARGO_MANIFEST_DIR")).join("../.."))
    }

    pub fn companies(&self) -> PathBuf {
        self.root.join("data/companies.v1")
    }

    pub fn agents(&self) -> PathBuf {
        self.root.join("fixtures/agents")
    }

    pub fn retrieval(&self) -> PathBuf {
        self.root.join("fixtures/retrieval/queries.json")
    }

    pub fn registry(&self) -> PathBuf {
        self.root.join("fixtures/registry")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("fixtures/registry/MANIFEST")
    }

    pub fn altfin(&self) -> PathBuf {
        self.root.join("fixtures/altfin")
    }

    pub fn goldens(&self) -> PathBuf {
        self.root.join("fixtures/goldens")
    }

    pub fn company_db(&self) -> Result<CompanyDb, SetupError> {
        Ok(load_company_db(self.companies())?)
    }

    pub fn corpus(&self) -> Result<FixtureCorpus, SetupError> {
        Ok(FixtureCorpus::load(&self.registry())?)
    }

    pub fn completion(&self) -> Arc<dyn CompletionProvider> {
        Arc::new(FixtureCompletionProvider::from_dir(self.agents()))
    }

    pub fn retrieval_provider(&self) -> Result<Arc<dyn RetrievalProvider>, SetupError> {
        Ok(Arc::new(FixtureRetrieval::load(&self.retrieval())?))
    }

    /// Fixture-mode dependencies: stub agents and retrieval, the registry at
    /// `registry_url`, fixture alt providers, a fixed clock and a file-drop
    /// sink under `out_dir`.
    pub fn deps(&self, registry_url: &str, out_dir: &Path) -> Result<PipelineDeps, SetupError> {
        self.deps_with(self.completion(), registry_url, out_dir)
    }

    /// As [`deps`](Self::deps) with a different completion provider.
    pub fn deps_with(
        &self,
        completion: Arc<dyn CompletionProvider>,
        registry_url: &str,
        out_dir: &Path,
    ) -> Result<PipelineDeps, SetupError> {
        let sink: Arc<dyn ReportSink> = Arc::new(FileDropSink::new(out_dir));
        Ok(PipelineDeps {
            companies: Arc::new(self.company_db()?),
            agents: AgentRunner::new(
                completion,
                self.retrieval_provider()?,
                Arc::new(PromptLibrary::bundled()),
            ),
            registry: Arc::new(HttpRegistryClient::new(registry_url)),
            classification: ClassificationTable::bundled(),
            extractor: Arc::new(TextLayerExtractor),
            alt: load_alt_dir(&self.altfin())?,
            sink,
            out_dir: out_dir.to_path_buf(),
            clock: fixture_clock(),
            recent_years: DEFAULT_RECENT,
        })
    }
}
