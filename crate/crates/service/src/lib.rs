//! Run-management service for the diligence pipeline: HTTP API, run store
//! with a JSONL journal, environment configuration and the CLI commands.

pub mod api;
pub mod bootstrap;
pub mod cli;
pub mod config;
pub mod runs;
pub mod store;
