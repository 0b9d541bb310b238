//! DAG execution engine: graph validation, readiness, routing and the
//! concurrent run loop.

mod context;
mod executor;
mod graph;
mod schedule;

pub use context::{NodeState, NodeStatus, RunContext, RunOutcome, SkipCause, Tick, TraceEvent};
pub use executor::{
    execute_run, DegradedUpstream, Engine, FnHandler, HandlerError, HandlerRegistry, NodeHandler,
    NodeInput, NodeOutput, RunObserver,
};
pub use graph::{
    validate_graph, EdgeSpec, FailurePolicy, NodeKind, NodeSpec, ValidatedGraph, ValidationReport,
    Violation, WorkflowGraph,
};
pub use schedule::{apply_route, ready_set};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("graph file: {0}")]
    GraphFile(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(ValidationReport),
    #[error("node {node} is bound to unregistered handler {handler:?}")]
    UnboundHandler { node: String, handler: String },
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("illegal transition for {node}: {from} -> {to}")]
    IllegalTransition {
        node: String,
        from: NodeState,
        to: NodeState,
    },
    #[error("artifact for {0} already recorded")]
    ArtifactExists(String),
    #[error("router {router} chose unknown branch {label:?}")]
    Routing { router: String, label: String },
}
