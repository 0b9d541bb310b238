//! Run lifecycle: trigger, observe, finish.

use std::path::PathBuf;
use std::sync::Arc;

use diligence_core::engine::{RunContext, RunOutcome};
use diligence_core::intake::{CompanyRecord, IntakeError, TriggerPayload};
use diligence_core::pipeline::{delivery_outcome, rendered_report, Pipeline};
use tokio::sync::watch;

use crate::store::{RunId, RunRecord, RunState, RunStore, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum TriggerError {
    #[error(transparent)]
    Malformed(IntakeError),
    #[error("unknown company {0:?}")]
    UnknownCompany(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub struct RunService {
    pipeline: Pipeline,
    store: RunStore,
    /// Bumped after every store write so waiters can re-check.
    changes: watch::Sender<u64>,
}

impl RunService {
    pub fn new(pipeline: Pipeline, store: RunStore) -> Self {
        Self {
            pipeline,
            store,
            changes: watch::Sender::new(0),
        }
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn companies(&self) -> &[CompanyRecord] {
        self.pipeline.deps().companies.records()
    }

    pub fn get(&self, run_id: &RunId) -> Option<RunRecord> {
        self.store.get(run_id)
    }

    pub fn list(&self) -> Vec<RunRecord> {
        self.store.list()
    }

    /// Validates the payload, records the run as Queued and starts it in
    /// the background.
    pub fn trigger(self: &Arc<Self>, payload: TriggerPayload) -> Result<RunId, TriggerError> {
        let run_id = self.enqueue(&payload)?;
        let service = Arc::clone(self);
        let id = run_id.clone();
        tokio::spawn(async move {
            service.execute(&id, &payload).await;
        });
        Ok(run_id)
    }

    /// Runs a trigger to completion in the calling task.
    pub async fn run_now(&self, payload: TriggerPayload) -> Result<RunRecord, TriggerError> {
        let run_id = self.enqueue(&payload)?;
        Ok(self.execute(&run_id, &payload).await)
    }

    /// Resolves once the run reaches Succeeded or Failed.
    pub async fn wait(&self, run_id: &RunId) -> Option<RunRecord> {
        let mut changes = self.changes.subscribe();
        loop {
            let record = self.store.get(run_id)?;
            if record.state.is_terminal() {
                return Some(record);
            }
            if changes.changed().await.is_err() {
                return self.store.get(run_id);
            }
        }
    }

    fn enqueue(&self, payload: &TriggerPayload) -> Result<RunId, TriggerError> {
        payload.validate().map_err(TriggerError::Malformed)?;
        let company = payload.company_id.trim();
        if self.pipeline.deps().companies.get(company).is_none() {
            return Err(TriggerError::UnknownCompany(company.to_string()));
        }
        let run_id = RunId::generate();
        self.store.insert(RunRecord::queued(
            run_id.clone(),
            company,
            payload.requested_by.trim(),
        ))?;
        self.bump();
        Ok(run_id)
    }

    async fn execute(&self, run_id: &RunId, payload: &TriggerPayload) -> RunRecord {
        let observe = |ctx: &RunContext| {
            let statuses = ctx.statuses().clone();
            self.write(run_id, move |r| {
                r.state = RunState::Running;
                r.node_statuses = statuses;
            });
        };
        let ctx = self
            .pipeline
            .run_observed(run_id.as_str(), payload, &observe)
            .await;
        self.export_trace(run_id, &ctx);

        let outcome = ctx.outcome(self.pipeline.graph());
        let report = rendered_report(&ctx);
        let delivered = delivery_outcome(&ctx).is_some_and(|d| d.delivered);
        let statuses = ctx.statuses().clone();
        self.write(run_id, move |r| {
            r.node_statuses = statuses;
            match (outcome, report) {
                (RunOutcome::Succeeded, Some(report)) => {
                    r.state = RunState::Succeeded;
                    r.report_path = Some(report.path);
                    r.undelivered = !delivered;
                }
                _ => r.state = RunState::Failed,
            }
        });
        self.store.get(run_id).expect("run was enqueued")
    }

    fn export_trace(&self, run_id: &RunId, ctx: &RunContext) {
        let dir: PathBuf = self.pipeline.deps().out_dir.join(run_id.as_str());
        let written = std::fs::create_dir_all(&dir)
            .and_then(|()| std::fs::write(dir.join("trace.jsonl"), ctx.trace_jsonl()));
        if let Err(e) = written {
            tracing::warn!(run = %run_id, error = %e, "trace export failed");
        }
    }

    fn write(&self, run_id: &RunId, change: impl FnOnce(&mut RunRecord)) {
        if let Err(e) = self.store.update(run_id, change) {
            tracing::error!(run = %run_id, error = %e, "run store rejected update");
        }
        self.bump();
    }

    fn bump(&self) {
        self.changes.send_modify(|n| *n += 1);
    }
}
