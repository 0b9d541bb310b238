use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use async_trait::async_trait;
use serde_json::Value;
use tokio::task::JoinSet;

use super::context::{RunContext, SkipCause};
use super::graph::{NodeKind, ValidatedGraph, WorkflowGraph};
use super::schedule::{apply_route, propagate_failure, ready_set};
use super::EngineError;

/// Everything a handler may look at. Artifacts are shared, never mutated.
#[derive(Debug, Clone)]
pub struct NodeInput {
    pub run_id: String,
    pub node_id: String,
    pub trigger: Arc<Value>,
    /// Artifacts of every succeeded ancestor, keyed by node id.
    pub upstream: BTreeMap<String, Arc<Value>>,
    /// Ancestors that failed or were skipped under degrade policy.
    pub degraded: Vec<DegradedUpstream>,
}

impl NodeInput {
    pub fn artifact(&self, node_id: &str) -> Option<&Value> {
        self.upstream.get(node_id).map(|a| a.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegradedUpstream {
    pub node_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeOutput {
    pub payload: Value,
    /// Branch label chosen by a Router node.
    pub route: Option<String>,
    /// Audit notes appended to the run trace.
    pub notes: Vec<String>,
}

impl NodeOutput {
    pub fn new(payload: Value) -> Self {
        Self {
            payload,
            route: None,
            notes: Vec::new(),
        }
    }

    pub fn routed(payload: Value, label: impl Into<String>) -> Self {
        Self {
            payload,
            route: Some(label.into()),
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HandlerError {
    /// Retryable once for Fetch nodes.
    #[error("transport error: {0}")]
    Transport(String),
    #[error("{0}")]
    Failed(String),
}

impl HandlerError {
    pub fn failed(message: impl Into<String>) -> Self {
        HandlerError::Failed(message.into())
    }
}

#[async_trait]
pub trait NodeHandler: Send + Sync {
    async fn run(&self, input: NodeInput) -> Result<NodeOutput, HandlerError>;
}

/// Adapter so plain async closures can serve as handlers in tests and glue code.
pub struct FnHandler<F>(pub F);

#[async_trait]
impl<F, Fut> NodeHandler for FnHandler<F>
where
    F: Fn(NodeInput) -> Fut + Send + Sync,
    Fut: std::future::Future<Output = Result<NodeOutput, HandlerError>> + Send,
{
    async fn run(&self, input: NodeInput) -> Result<NodeOutput, HandlerError> {
        (self.0)(input).await
    }
}

#[derive(Clone, Default)]
pub struct HandlerRegistry {
    handlers: HashMap<String, Arc<dyn NodeHandler>>,
}

impl HandlerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, key: impl Into<String>, handler: Arc<dyn NodeHandler>) -> &mut Self {
        self.handlers.insert(key.into(), handler);
        self
    }

    pub fn with(mut self, key: impl Into<String>, handler: impl NodeHandler + 'static) -> Self {
        self.handlers.insert(key.into(), Arc::new(handler));
        self
    }

    pub fn get(&self, key: &str) -> Option<Arc<dyn NodeHandler>> {
        self.handlers.get(key).cloned()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.handlers.contains_key(key)
    }
}

/// Receives the context after every batch of state changes. Called from the
/// executor's owning task, so each call sees one consistent observation point.
pub trait RunObserver: Send + Sync {
    fn on_update(&self, ctx: &RunContext);
}

impl<F: Fn(&RunContext) + Send + Sync> RunObserver for F {
    fn on_update(&self, ctx: &RunContext) {
        self(ctx)
    }
}

struct NoopObserver;

impl RunObserver for NoopObserver {
    fn on_update(&self, _ctx: &RunContext) {}
}

pub struct Engine {
    graph: Arc<ValidatedGraph>,
    handlers: HandlerRegistry,
}

impl Engine {
    /// Validates the graph and checks every handler key is bound.
    pub fn new(graph: WorkflowGraph, handlers: HandlerRegistry) -> Result<Self, EngineError> {
        let graph = ValidatedGraph::new(graph).map_err(EngineError::InvalidGraph)?;
        Self::from_validated(Arc::new(graph), handlers)
    }

    pub fn from_validated(
        graph: Arc<ValidatedGraph>,
        handlers: HandlerRegistry,
    ) -> Result<Self, EngineError> {
        for node in &graph.graph().nodes {
            if !handlers.contains(&node.handler_key) {
                return Err(EngineError::UnboundHandler {
                    node: node.id.clone(),
                    handler: node.handler_key.clone(),
                });
            }
        }
        Ok(Self { graph, handlers })
    }

    pub fn graph(&self) -> &ValidatedGraph {
        &self.graph
    }

    pub async fn execute(&self, run_id: &str, trigger_payload: Value) -> RunContext {
        self.execute_observed(run_id, trigger_payload, &NoopObserver)
            .await
    }

    pub async fn execute_observed(
        &self,
        run_id: &str,
        trigger_payload: Value,
        observer: &dyn RunObserver,
    ) -> RunContext {
        let graph = &self.graph;
        let mut ctx = RunContext::new(run_id, graph);
        ctx.set_trigger_payload(trigger_payload);
        observer.on_update(&ctx);

        let mut running: JoinSet<Result<NodeOutput, HandlerError>> = JoinSet::new();
        let mut in_flight: HashMap<tokio::task::Id, (String, u32)> = HashMap::new();

        loop {
            let ready = ready_set(graph, &ctx);
            for id in &ready {
                ctx.mark_ready(id).expect("ready node is pending");
                ctx.mark_running(id).expect("ready node can start");
            }
            for id in ready {
                self.spawn(&mut running, &mut in_flight, &ctx, &id, 1);
            }
            observer.on_update(&ctx);

            let Some(joined) = running.join_next_with_id().await else {
                break;
            };
            let (task_id, result) = match joined {
                Ok((task_id, result)) => (task_id, result),
                Err(join_error) => {
                    let id = join_error.id();
                    (id, Err(HandlerError::Failed(panic_message(join_error))))
                }
            };
            let (node_id, attempt) = in_flight.remove(&task_id).expect("task is tracked");
            let kind = graph.node(&node_id).expect("node exists").kind;

            match result {
                Ok(output) => self.complete(&mut ctx, &node_id, output),
                Err(HandlerError::Transport(msg)) if kind == NodeKind::Fetch && attempt == 1 => {
                    ctx.note(&node_id, format!("retrying after transport error: {msg}"));
                    self.spawn(&mut running, &mut in_flight, &ctx, &node_id, attempt + 1);
                }
                Err(err) => self.fail(&mut ctx, &node_id, err.to_string()),
            }
        }

        let stranded: Vec<String> = ctx
            .statuses()
            .iter()
            .filter(|(_, st)| st.state == super::NodeState::Pending)
            .map(|(id, _)| id.clone())
            .collect();
        for id in stranded {
            tracing::warn!(run = run_id, node = %id, "node stranded in pending state");
            ctx.mark_skipped(&id, SkipCause::Unreachable)
                .expect("pending node can be skipped");
        }
        observer.on_update(&ctx);
        ctx
    }

    fn spawn(
        &self,
        running: &mut JoinSet<Result<NodeOutput, HandlerError>>,
        in_flight: &mut HashMap<tokio::task::Id, (String, u32)>,
        ctx: &RunContext,
        node_id: &str,
        attempt: u32,
    ) {
        let spec = self.graph.node(node_id).expect("node exists");
        let handler = self
            .handlers
            .get(&spec.handler_key)
            .expect("bound at construction");
        let input = self.input_for(ctx, node_id);
        let handle = running.spawn(async move { handler.run(input).await });
        in_flight.insert(handle.id(), (node_id.to_string(), attempt));
    }

    fn input_for(&self, ctx: &RunContext, node_id: &str) -> NodeInput {
        let graph = &self.graph;
        let idx = graph.idx(node_id).expect("node exists");
        let mut upstream = BTreeMap::new();
        let mut degraded = Vec::new();
        for &a in graph.ancestors_of(idx) {
            let id = &graph.spec(a).id;
            if let Some(artifact) = ctx.artifact(id) {
                upstream.insert(id.clone(), artifact.clone());
            }
            let status = ctx.status(id).expect("status per node");
            let degraded_failure = status.state == super::NodeState::Failed
                && graph.spec(a).policy == super::FailurePolicy::Degrade;
            if degraded_failure {
                degraded.push(DegradedUpstream {
                    node_id: id.clone(),
                    reason: status.error.clone().unwrap_or_default(),
                });
            } else if let Some(cause @ SkipCause::Degraded { .. }) = &status.skip_cause {
                degraded.push(DegradedUpstream {
                    node_id: id.clone(),
                    reason: cause.to_string(),
                });
            }
        }
        NodeInput {
            run_id: ctx.run_id().to_string(),
            node_id: node_id.to_string(),
            trigger: ctx
                .trigger_payload()
                .cloned()
                .unwrap_or_else(|| Arc::new(Value::Null)),
            upstream,
            degraded,
        }
    }

    fn complete(&self, ctx: &mut RunContext, node_id: &str, output: NodeOutput) {
        let spec = self.graph.node(node_id).expect("node exists");
        for note in &output.notes {
            ctx.note(node_id, note.clone());
        }
        if spec.kind == NodeKind::Router {
            let Some(label) = output.route.as_deref() else {
                self.fail(
                    ctx,
                    node_id,
                    format!("router {node_id} returned no branch label"),
                );
                return;
            };
            if !self.graph.branch_labels(node_id).contains(&label) {
                let err = EngineError::Routing {
                    router: node_id.to_string(),
                    label: label.to_string(),
                };
                self.fail(ctx, node_id, err.to_string());
                return;
            }
            ctx.mark_succeeded(node_id, output.payload)
                .expect("running node can succeed");
            apply_route(node_id, label, &self.graph, ctx).expect("label checked above");
        } else {
            ctx.mark_succeeded(node_id, output.payload)
                .expect("running node can succeed");
        }
    }

    fn fail(&self, ctx: &mut RunContext, node_id: &str, message: String) {
        tracing::debug!(run = ctx.run_id(), node = node_id, error = %message, "node failed");
        ctx.mark_failed(node_id, message)
            .expect("running node can fail");
        propagate_failure(&self.graph, ctx, node_id).expect("failure propagation");
    }
}

fn panic_message(err: tokio::task::JoinError) -> String {
    if err.is_cancelled() {
        return "handler task cancelled".to_string();
    }
    let payload = err.into_panic();
    let detail = payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "non-string panic payload".to_string());
    format!("handler panicked: {detail}")
}

/// Validates, binds and runs `graph` once.
pub async fn execute_run(
    graph: WorkflowGraph,
    handlers: HandlerRegistry,
    run_id: &str,
    trigger_payload: Value,
) -> Result<RunContext, EngineError> {
    let engine = Engine::new(graph, handlers)?;
    Ok(engine.execute(run_id, trigger_payload).await)
}
