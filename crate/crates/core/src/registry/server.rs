//! Local registry server backed by a corpus directory:
//! `<root>/<registration>/index.json` and `<root>/<registration>/docs/<doc_id>.<ext>`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use serde::Deserialize;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

use super::RegistryError;

#[derive(Debug, Clone, Default)]
pub struct FixtureCorpus {
    indexes: HashMap<String, Vec<u8>>,
    documents: HashMap<String, (Vec<u8>, &'static str)>,
}

impl FixtureCorpus {
    pub fn load(root: &Path) -> Result<Self, RegistryError> {
        let io = |e: std::io::Error| RegistryError::Malformed(format!("{}: {e}", root.display()));
        let mut corpus = Self::default();
        for company in std::fs::read_dir(root).map_err(io)? {
            let company = company.map_err(io)?.path();
            if !company.is_dir() {
                continue;
            }
            let registration = company
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default()
                .to_string();
            let index_path = company.join("index.json");
            if let Ok(index) = std::fs::read(&index_path) {
                corpus.indexes.insert(registration, index);
            }
            let docs = company.join("docs");
            if !docs.is_dir() {
                continue;
            }
            for doc in std::fs::read_dir(&docs).map_err(io)? {
                let path = doc.map_err(io)?.path();
                let (Some(stem), ext) =
                    (path.file_stem().and_then(|s| s.to_str()), path.extension())
                else {
                    continue;
                };
                let content_type = match ext.and_then(|e| e.to_str()) {
                    Some("pdf") => "application/pdf",
                    Some("html") => "text/html; charset=utf-8",
                    _ => "application/octet-stream",
                };
                let bytes = std::fs::read(&path).map_err(io)?;
                corpus
                    .documents
                    .insert(stem.to_string(), (bytes, content_type));
            }
        }
        Ok(corpus)
    }

    pub fn registrations(&self) -> impl Iterator<Item = &str> {
        self.indexes.keys().map(String::as_str)
    }

    pub fn document_ids(&self) -> impl Iterator<Item = &str> {
        self.documents.keys().map(String::as_str)
    }

    /// Drops one registration's index, as if the portal had nothing for it.
    pub fn without_registration(mut self, registration: &str) -> Self {
        self.indexes.remove(registration);
        self
    }
}

#[derive(Deserialize)]
struct IndexQuery {
    reg: String,
}

async fn index(State(corpus): State<Arc<FixtureCorpus>>, Query(q): Query<IndexQuery>) -> Response {
    match corpus.indexes.get(&q.reg) {
        Some(body) => ([(header::CONTENT_TYPE, "application/json")], body.clone()).into_response(),
        None => (StatusCode::NOT_FOUND, "unknown registration").into_response(),
    }
}

async fn document(
    State(corpus): State<Arc<FixtureCorpus>>,
    UrlPath(doc_id): UrlPath<String>,
) -> Response {
    match corpus.documents.get(&doc_id) {
        Some((body, content_type)) => {
            ([(header::CONTENT_TYPE, *content_type)], body.clone()).into_response()
        }
        None => (StatusCode::NOT_FOUND, "unknown document").into_response(),
    }
}

pub fn fixture_router(corpus: FixtureCorpus) -> Router {
    Router::new()
        .route("/index", get(index))
        .route("/doc/{doc_id}", get(document))
        .with_state(Arc::new(corpus))
}

/// A fixture server bound to a local port; stops when dropped.
pub struct FixtureServer {
    addr: SocketAddr,
    task: JoinHandle<()>,
}

impl FixtureServer {
    pub async fn start(corpus: FixtureCorpus) -> std::io::Result<Self> {
        Self::bind(corpus, "127.0.0.1:0").await
    }

    pub async fn bind(corpus: FixtureCorpus, addr: &str) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let app = fixture_router(corpus);
        let task = tokio::spawn(async move {
            if let Err(e) = axum::serve(listener, app).await {
                tracing::error!(error = %e, "fixture registry server stopped");
            }
        });
        Ok(Self { addr, task })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Serves until the task ends.
    pub async fn wait(mut self) {
        let task = std::mem::replace(&mut self.task, tokio::spawn(async {}));
        let _ = task.await;
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.task.abort();
    }
}
