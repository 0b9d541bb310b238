//! Per-run state: node statuses, artifacts and the ordered event trace.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::graph::ValidatedGraph;
use super::EngineError;

/// Nanoseconds since the run's clock origin. Monotonic, never wall time.
pub type Tick = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeState {
    Pending,
    Ready,
    Running,
    Succeeded,
    Failed,
    Skipped,
}

impl NodeState {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            NodeState::Succeeded | NodeState::Failed | NodeState::Skipped
        )
    }

    fn can_move_to(self, next: NodeState) -> bool {
        use NodeState::*;
        matches!(
            (self, next),
            (Pending, Ready)
                | (Ready, Running)
                | (Running, Succeeded)
                | (Running, Failed)
                | (Pending, Skipped)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeState::Pending => "pending",
            NodeState::Ready => "ready",
            NodeState::Running => "running",
            NodeState::Succeeded => "succeeded",
            NodeState::Failed => "failed",
            NodeState::Skipped => "skipped",
        }
    }
}

impl fmt::Display for NodeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Why a node never ran.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "cause", rename_all = "snake_case")]
pub enum SkipCause {
    /// Only reachable through a branch the router did not take.
    Route { router: String, label: String },
    /// A strict-policy ancestor failed.
    UpstreamFailure { origin: String },
    /// A degrade-policy ancestor failed; the gap is absorbed further down.
    Degraded { origin: String },
    /// Left pending when the run drained. Indicates an engine bug.
    Unreachable,
}

impl fmt::Display for SkipCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkipCause::Route { router, label } => {
                write!(f, "branch not taken at {router} (took {label:?})")
            }
            SkipCause::UpstreamFailure { origin } => write!(f, "upstream node {origin} failed"),
            SkipCause::Degraded { origin } => write!(f, "upstream node {origin} failed (degraded)"),
            SkipCause::Unreachable => write!(f, "unreachable"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeStatus {
    pub state: NodeState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub started_at: Option<Tick>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<Tick>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skip_cause: Option<SkipCause>,
}

impl NodeStatus {
    fn pending() -> Self {
        Self {
            state: NodeState::Pending,
            started_at: None,
            finished_at: None,
            error: None,
            skip_cause: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub run_id: String,
    pub node_id: String,
    pub transition: String,
    pub t: Tick,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy)]
struct RunClock {
    origin: Instant,
}

impl RunClock {
    fn now(&self) -> Tick {
        self.origin.elapsed().as_nanos() as Tick
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunOutcome {
    Succeeded,
    Failed,
}

/// All state for one run. The executor is the only writer.
#[derive(Debug, Clone)]
pub struct RunContext {
    run_id: String,
    trigger_payload: Option<Arc<Value>>,
    artifacts: BTreeMap<String, Arc<Value>>,
    statuses: BTreeMap<String, NodeStatus>,
    routes: BTreeMap<String, String>,
    trace: Vec<TraceEvent>,
    clock: RunClock,
    last_tick: Tick,
}

impl RunContext {
    pub fn new(run_id: impl Into<String>, graph: &ValidatedGraph) -> Self {
        let statuses = graph
            .graph()
            .nodes
            .iter()
            .map(|n| (n.id.clone(), NodeStatus::pending()))
            .collect();
        Self {
            run_id: run_id.into(),
            trigger_payload: None,
            artifacts: BTreeMap::new(),
            statuses,
            routes: BTreeMap::new(),
            trace: Vec::new(),
            clock: RunClock {
                origin: Instant::now(),
            },
            last_tick: 0,
        }
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn set_trigger_payload(&mut self, payload: Value) {
        self.trigger_payload = Some(Arc::new(payload));
    }

    pub fn trigger_payload(&self) -> Option<&Arc<Value>> {
        self.trigger_payload.as_ref()
    }

    pub fn artifact(&self, node_id: &str) -> Option<&Arc<Value>> {
        self.artifacts.get(node_id)
    }

    pub fn artifacts(&self) -> &BTreeMap<String, Arc<Value>> {
        &self.artifacts
    }

    pub fn status(&self, node_id: &str) -> Option<&NodeStatus> {
        self.statuses.get(node_id)
    }

    pub fn state(&self, node_id: &str) -> Option<NodeState> {
        self.statuses.get(node_id).map(|s| s.state)
    }

    pub fn statuses(&self) -> &BTreeMap<String, NodeStatus> {
        &self.statuses
    }

    pub fn route_taken(&self, router: &str) -> Option<&str> {
        self.routes.get(router).map(String::as_str)
    }

    pub(crate) fn routes(&self) -> &BTreeMap<String, String> {
        &self.routes
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    /// Line-delimited JSON, one event per line.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for event in &self.trace {
            out.push_str(&serde_json::to_string(event).expect("trace event serializes"));
            out.push('\n');
        }
        out
    }

    /// A run fails when any node failed under strict policy.
    pub fn outcome(&self, graph: &ValidatedGraph) -> RunOutcome {
        let strict_failure = self.statuses.iter().any(|(id, st)| {
            st.state == NodeState::Failed
                && graph
                    .node(id)
                    .is_some_and(|n| n.policy == super::FailurePolicy::Strict)
        });
        if strict_failure {
            RunOutcome::Failed
        } else {
            RunOutcome::Succeeded
        }
    }

    /// Canonical bytes of the artifact map, for replay comparisons.
    pub fn artifact_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.artifacts).expect("artifacts serialize")
    }

    fn tick(&mut self) -> Tick {
        let now = self.clock.now().max(self.last_tick);
        self.last_tick = now;
        now
    }

    fn push_event(&mut self, node_id: &str, transition: &str, t: Tick, detail: Option<String>) {
        self.trace.push(TraceEvent {
            run_id: self.run_id.clone(),
            node_id: node_id.to_string(),
            transition: transition.to_string(),
            t,
            detail,
        });
    }

    fn transition(&mut self, node_id: &str, next: NodeState) -> Result<Tick, EngineError> {
        let current = self
            .statuses
            .get(node_id)
            .ok_or_else(|| EngineError::UnknownNode(node_id.to_string()))?
            .state;
        if !current.can_move_to(next) {
            return Err(EngineError::IllegalTransition {
                node: node_id.to_string(),
                from: current,
                to: next,
            });
        }
        let t = self.tick();
        let status = self.statuses.get_mut(node_id).expect("checked above");
        status.state = next;
        match next {
            NodeState::Running => status.started_at = Some(t),
            NodeState::Succeeded | NodeState::Failed | NodeState::Skipped => {
                status.finished_at = Some(t)
            }
            _ => {}
        }
        Ok(t)
    }

    pub fn mark_ready(&mut self, node_id: &str) -> Result<(), EngineError> {
        let t = self.transition(node_id, NodeState::Ready)?;
        self.push_event(node_id, "ready", t, None);
        Ok(())
    }

    pub fn mark_running(&mut self, node_id: &str) -> Result<(), EngineError> {
        let t = self.transition(node_id, NodeState::Running)?;
        self.push_event(node_id, "running", t, None);
        Ok(())
    }

    /// Records the node's single artifact together with its Succeeded transition.
    pub fn mark_succeeded(&mut self, node_id: &str, artifact: Value) -> Result<(), EngineError> {
        if self.artifacts.contains_key(node_id) {
            return Err(EngineError::ArtifactExists(node_id.to_string()));
        }
        let t = self.transition(node_id, NodeState::Succeeded)?;
        self.artifacts
            .insert(node_id.to_string(), Arc::new(artifact));
        self.push_event(node_id, "succeeded", t, None);
        Ok(())
    }

    pub fn mark_failed(
        &mut self,
        node_id: &str,
        error: impl Into<String>,
    ) -> Result<(), EngineError> {
        let error = error.into();
        let t = self.transition(node_id, NodeState::Failed)?;
        self.statuses.get_mut(node_id).expect("exists").error = Some(error.clone());
        self.push_event(node_id, "failed", t, Some(error));
        Ok(())
    }

    pub fn mark_skipped(&mut self, node_id: &str, cause: SkipCause) -> Result<(), EngineError> {
        let t = self.transition(node_id, NodeState::Skipped)?;
        let detail = cause.to_string();
        self.statuses.get_mut(node_id).expect("exists").skip_cause = Some(cause);
        self.push_event(node_id, "skipped", t, Some(detail));
        Ok(())
    }

    pub(crate) fn record_route(&mut self, router: &str, label: &str) {
        self.routes.insert(router.to_string(), label.to_string());
        let t = self.tick();
        self.push_event(router, "routed", t, Some(label.to_string()));
    }

    /// Appends an audit note to the trace without changing any status.
    pub fn note(&mut self, node_id: &str, detail: impl Into<String>) {
        let t = self.tick();
        self.push_event(node_id, "note", t, Some(detail.into()));
    }
}
