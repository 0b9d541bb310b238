//! Command-line entry points. Each command returns its process exit code.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use diligence_core::engine::{validate_graph, WorkflowGraph};
use diligence_core::intake::TriggerPayload;
use diligence_core::registry::FixtureServer;
use diligence_core::setup::FixtureLayout;

use crate::api;
use crate::bootstrap::boot;
use crate::config::ServiceConfig;
use crate::runs::RunService;
use crate::store::{RunState, RunStore};

#[derive(Debug, Parser)]
#[command(name = "diligence", about = "Due-diligence report pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Start the HTTP API.
    Serve,
    /// Run one company headless and print the run record as JSON.
    Run {
        #[arg(long)]
        company: String,
        /// Artifact directory; overrides DILIGENCE_OUT.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "desk@diligence.example")]
        requested_by: String,
    },
    /// Check a workflow graph file and list any violations.
    ValidateGraph { file: PathBuf },
    /// Registry fixture server.
    Fixtures {
        #[command(subcommand)]
        command: FixturesCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum FixturesCommand {
    /// Serve the fixture registry corpus over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8090")]
        addr: String,
    },
}

fn fail(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(2)
}

pub async fn dispatch(cli: Cli) -> ExitCode {
    let config = match ServiceConfig::from_env() {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    match cli.command {
        Command::Serve => serve(config).await,
        Command::Run {
            company,
            out,
            requested_by,
        } => {
            let config = ServiceConfig {
                out_dir: out.unwrap_or(config.out_dir),
                ..config
            };
            run_once(config, &company, &requested_by).await
        }
        Command::ValidateGraph { file } => validate(&file),
        Command::Fixtures {
            command: FixturesCommand::Serve { addr },
        } => serve_fixtures(&config, &addr).await,
    }
}

async fn serve(config: ServiceConfig) -> ExitCode {
    let booted = match boot(&config).await {
        Ok(b) => b,
        Err(e) => return fail(e),
    };
    let store = match RunStore::with_journal(&config.out_dir.join("journal.jsonl")) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let service = Arc::new(RunService::new(booted.pipeline, store));
    let listener = match tokio::net::TcpListener::bind(config.listen).await {
        Ok(l) => l,
        Err(e) => return fail(format!("{}: {e}", config.listen)),
    };
    tracing::info!(addr = %config.listen, "listening");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    match axum::serve(listener, api::router(service))
        .with_graceful_shutdown(shutdown)
        .await
    {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

async fn run_once(config: ServiceConfig, company: &str, requested_by: &str) -> ExitCode {
    let booted = match boot(&config).await {
        Ok(b) => b,
        Err(e) => return fail(e),
    };
    let service = RunService::new(booted.pipeline, RunStore::in_memory());
    let record = match service
        .run_now(TriggerPayload::new(company, requested_by))
        .await
    {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&record).expect("record serializes")
    );
    if record.state == RunState::Succeeded {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn validate(file: &PathBuf) -> ExitCode {
    let graph = match WorkflowGraph::load(file) {
        Ok(g) => g,
        Err(e) => return fail(e),
    };
    let report = validate_graph(&graph);
    if report.ok {
        println!("{}: ok", file.display());
        ExitCode::SUCCESS
    } else {
        for violation in &report.violations {
            println!("{}: {violation}", file.display());
        }
        ExitCode::FAILURE
    }
}

async fn serve_fixtures(config: &ServiceConfig, addr: &str) -> ExitCode {
    let corpus = match FixtureLayout::new(&config.root).corpus() {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let server = match FixtureServer::bind(corpus, addr).await {
        Ok(s) => s,
        Err(e) => return fail(format!("{addr}: {e}")),
    };
    println!("fixture registry at {}", server.base_url());
    let _ = tokio::signal::ctrl_c().await;
    ExitCode::SUCCESS
}
