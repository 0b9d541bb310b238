//! Binds every node of the diligence graph to its handler.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::agents::{AgentError, AgentOutput, AgentRole, AgentRunner};
use crate::delivery::{DeliveryRequest, ReportSink};
use crate::engine::{
    Engine, EngineError, HandlerError, HandlerRegistry, NodeHandler, NodeInput, NodeOutput,
    RunContext, RunObserver, ValidatedGraph, WorkflowGraph,
};
use crate::extract::{
    extract_text, summarize_financials, summarize_modifications, CorporateEvent, ExtractedDocument,
    ExtractorBackend, FinancialStatementRecord, Summary,
};
use crate::fallback::{
    decide, registry_suffices, resolve_financials, AltChain, AltLookup, RegistryOutcome,
};
use crate::intake::{
    resolve_company, verify_profile, CompanyDb, CompanyProfile, CompanyRecord, TriggerPayload,
};
use crate::nodes;
use crate::registry::{
    classify_documents, fetch_document_index, fetch_pdf, has_valid_registry_number, select_recent,
    ArGemi, ClassificationTable, DocumentIndex, DocumentIndexEntry, PdfBlob, RegistryClient,
    RegistryError, BRANCH_NO,
};
use crate::report::{assemble_from, render_html};

const BUNDLED_GRAPH: &str = include_str!("../../../graphs/diligence.v1");

pub fn bundled_graph() -> WorkflowGraph {
    WorkflowGraph::from_json(BUNDLED_GRAPH).expect("bundled graph parses")
}

/// Source of retrieval timestamps; fixed in fixture mode so reports are
/// reproducible.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

/// Everything the handlers need, shared across runs.
pub struct PipelineDeps {
    pub companies: Arc<CompanyDb>,
    pub agents: AgentRunner,
    pub registry: Arc<dyn RegistryClient>,
    pub classification: ClassificationTable,
    pub extractor: Arc<dyn ExtractorBackend>,
    pub alt: AltChain,
    pub sink: Arc<dyn ReportSink>,
    /// Reports land in `<out_dir>/<run_id>/report.html`.
    pub out_dir: PathBuf,
    pub clock: Arc<dyn Clock>,
    pub recent_years: usize,
}

/// Artifact of the render node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedReport {
    pub path: PathBuf,
    pub sha256: String,
    pub state: String,
}

/// Artifact of the deliver node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryOutcome {
    pub delivered: bool,
    pub sink: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn failed(e: impl std::fmt::Display) -> HandlerError {
    HandlerError::Failed(e.to_string())
}

fn agent_error(e: AgentError) -> HandlerError {
    if e.is_transport() {
        HandlerError::Transport(e.to_string())
    } else {
        failed(e)
    }
}

fn registry_error(e: RegistryError) -> HandlerError {
    if e.is_transport() {
        HandlerError::Transport(e.to_string())
    } else {
        failed(e)
    }
}

fn typed<T: for<'de> Deserialize<'de>>(input: &NodeInput, node: &str) -> Result<T, HandlerError> {
    let value = input
        .artifact(node)
        .ok_or_else(|| failed(format!("missing upstream artifact {node}")))?;
    serde_json::from_value(value.clone()).map_err(|e| failed(format!("artifact {node}: {e}")))
}

fn company(input: &NodeInput) -> Result<CompanyRecord, HandlerError> {
    let intake = input
        .artifact(nodes::INTAKE)
        .and_then(|v| v.get("company"))
        .ok_or_else(|| failed("missing intake artifact"))?;
    serde_json::from_value(intake.clone()).map_err(failed)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("artifact serializes")
}

/// Prompt input name to the node whose artifact supplies it.
fn input_node(name: &str) -> Option<&'static str> {
    Some(match name {
        "profile" => nodes::CONTEXT,
        "source_map" => nodes::SOURCE_MAPPER,
        "sector" => nodes::SECTOR,
        "competition" => nodes::COMPETITION,
        "news" => nodes::NEWS,
        "signals" => nodes::SIGNALS,
        "research" => nodes::RESEARCHER,
        "financials" => nodes::FINANCIAL_JOIN,
        "analyst" => nodes::ANALYST,
        _ => return None,
    })
}

struct Webhook;

#[async_trait]
impl NodeHandler for Webhook {
    async fn run(&self, input: NodeInput) -> Result<NodeOutput, HandlerError> {
        let payload: TriggerPayload =
            serde_json::from_value(input.trigger.as_ref().clone()).map_err(failed)?;
        payload.validate().map_err(failed)?;
        Ok(NodeOutput::new(to_value(&payload)))
    }
}

struct Intake(Arc<PipelineDeps>);

#[async_trait]
impl NodeHandler for Intake {
    async fn run(&self, input: NodeInput) -> Result<NodeOutput, HandlerError> {
        let payload: TriggerPayload = typed(&input, nodes::TRIGGER)?;
        let record = resolve_company(&payload, &self.0.companies).map_err(failed)?;
        Ok(NodeOutput::new(
            json!({"company": record, "trigger": payload}),
        ))
    }
}

/// Runs one agent role over the artifacts its prompt declares.
struct AgentNode {
    deps: Arc<PipelineDeps>,
    role: AgentRole,
}

#[async_trait]
impl NodeHandler for AgentNode {
    async fn run(&self, input: NodeInput) -> Result<NodeOutput, HandlerError> {
        let record = company(&input)?;
        let mut inputs = BTreeMap::new();
        for name in &self.deps.agents.prompts().role(self.role).inputs {
            if name == "company" {
                inputs.insert(name.clone(), to_value(&record));
            } else if let Some(value) = input_node(name).and_then(|node| input.artifact(node)) {
                inputs.insert(name.clone(), value.clone());
            }
        }
        let output = self
            .deps
            .agents
            .run_agent(self.role, &record.company_id, &inputs)
            .await
            .map_err(agent_error)?;
        if self.role == AgentRole::ContextAgent {
            let profile: CompanyProfile =
                serde_json::from_value(output.payload.clone()).map_err(failed)?;
            verify_profile(&profile, &record).map_err(failed)?;
        }
        Ok(NodeOutput::new(to_value(&output)))
    }
}

struct RegistryRouter;

#[async_trait]
impl NodeHandler for RegistryRouter {
    async fn run(&self, input: NodeInput) -> Result<NodeOutput, HandlerError> {
        let record = company(&input)?;
        let label = has_valid_registry_number(&record);
        Ok(NodeOutput::routed(json!({"branch": label}), label))
    }
}

struct RegistryIndexNode(Arc<PipelineDeps>);

#[async_trait]
impl NodeHandler for RegistryIndexNode {
    async fn run(&self, input: NodeInput) -> Result<NodeOutput, HandlerError> {
        let record = company(&input)?;
        let registration =
            ArGemi::parse(record.registration.as_deref().unwrap_or_default()).map_err(failed)?;
        let index = fetch_document_index(&registration, self.0.registry.as_ref())
            .await
            .map_err(registry_error)?;
        let mut output = NodeOutput::new(to_value(&index));
        if index.truncated {
            output = output.with_note(format!(
                "index truncated: {} of {} documents returned",
                index.entries.len(),
                index.total
            ));
        }
        Ok(output)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Streams {
    modifications: Vec<DocumentIndexEntry>,
    financials: Vec<DocumentIndexEntry>,
}

struct Classify(Arc<PipelineDeps>);

#[async_trait]
impl NodeHandler for Classify {
    async fn run(&self, input: NodeInput) -> Result<NodeOutput, HandlerError> {
        let index: DocumentIndex = typed(&input, nodes::REGISTRY_INDEX)?;
        let (modifications, financials) =
            classify_documents(&index.entries, &self.0.classification);
        let recent = select_recent(&financials, self.0.recent_years.max(1));
        Ok(NodeOutput::new(to_value(&Streams {
            modifications,
            financials: recent,
        })))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Blobs {
    documents: Vec<PdfBlob>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Extracted {
    documents: Vec<ExtractedDocument>,
}

/// Fetches one stream's documents; which stream depends on the node.
struct FetchDocuments(Arc<PipelineDeps>);

#[async_trait]
impl NodeHandler for FetchDocuments {
    async fn run(&self, input: NodeInput) -> Result<NodeOutput, HandlerError> {
        let streams: Streams = typed(&input, nodes::CLASSIFY)?;
        let entries = match input.node_id.as_str() {
            nodes::FETCH_FIN => streams.financials,
            nodes::FETCH_MOD => streams.modifications,
            other => {
                return Err(failed(format!(
                    "fetch handler bound to unexpected node {other}"
                )))
            }
        };
        let retrieved_at = self.0.clock.now();
        let mut fetches = tokio::task::JoinSet::new();
        for (i, entry) in entries.into_iter().enumerate() {
            let client = self.0.registry.clone();
            fetches.spawn(async move {
                (
                    i,
                    fetch_pdf(&entry.doc_id, client.as_ref(), retrieved_at).await,
                )
            });
        }
        let mut blobs = Vec::new();
        while let Some(joined) = fetches.join_next().await {
            let (i, result) = joined.map_err(failed)?;
            blobs.push((i, result.map_err(registry_error)?));
        }
        blobs.sort_by_key(|(i, _)| *i);
        let documents: Vec<PdfBlob> = blobs.into_iter().map(|(_, b)| b).collect();
        let notes = documents
            .iter()
            .map(|b| format!("fetched {} sha256={}", b.doc_id, b.content_hash))
            .collect();
        Ok(NodeOutput {
            payload: to_value(&Blobs { documents }),
            route: None,
            notes,
        })
    }
}

struct ExtractDocuments(Arc<PipelineDeps>);

#[async_trait]
impl NodeHandler for ExtractDocuments {
    async fn run(&self, input: NodeInput) -> Result<NodeOutput, HandlerError> {
        let source = match input.node_id.as_str() {
            nodes::EXTRACT_FIN => nodes::FETCH_FIN,
            nodes::EXTRACT_MOD => nodes::FETCH_MOD,
            other => {
                return Err(failed(format!(
                    "extract handler bound to unexpected node {other}"
                )))
            }
        };
        let blobs: Blobs = typed(&input, source)?;
        let extractor = self.0.extractor.clone();
        let documents = tokio::task::spawn_blocking(move || {
            blobs
                .documents
                .iter()
                .map(|b| extract_text(b, extractor.as_ref()))
                .collect::<Result<Vec<_>, _>>()
        })
        .await
        .map_err(failed)?
        .map_err(failed)?;
        let mut output = NodeOutput::new(Value::Null);
        for doc in &documents {
            for note in &doc.notes {
                output = output.with_note(format!("{}: {note}", doc.doc_id));
            }
        }
        output.payload = to_value(&Extracted { documents });
        Ok(output)
    }
}

struct FinSummaryNode(Arc<PipelineDeps>);

#[async_trait]
impl NodeHandler for FinSummaryNode {
    async fn run(&self, input: NodeInput) -> Result<NodeOutput, HandlerError> {
        let record = company(&input)?;
        let docs: Extracted = typed(&input, nodes::EXTRACT_FIN)?;
        let summary = summarize_financials(&docs.documents, &record, &self.0.agents)
            .await
            .map_err(agent_error)?;
        let mut output = NodeOutput::new(Value::Null);
        for reason in &summary.rejected {
            output = output.with_note(format!("rejected {reason}"));
        }
        output.payload = to_value(&summary);
        Ok(output)
    }
}

struct ModSummaryNode(Arc<PipelineDeps>);

#[async_trait]
impl NodeHandler for ModSummaryNode {
    async fn run(&self, input: NodeInput) -> Result<NodeOutput, HandlerError> {
        let record = company(&input)?;
        let docs: Extracted = typed(&input, nodes::EXTRACT_MOD)?;
        let summary = summarize_modifications(&docs.documents, &record, &self.0.agents)
            .await
            .map_err(agent_error)?;
        let mut output = NodeOutput::new(Value::Null);
        for reason in &summary.rejected {
            output = output.with_note(format!("rejected {reason}"));
        }
        output.payload = to_value(&summary);
        Ok(output)
    }
}

struct AltFinancialsNode(Arc<PipelineDeps>);

#[async_trait]
impl NodeHandler for AltFinancialsNode {
    async fn run(&self, input: NodeInput) -> Result<NodeOutput, HandlerError> {
        let record = company(&input)?;
        let lookup = self.0.alt.query(&record).await;
        Ok(NodeOutput::new(to_value(&lookup)))
    }
}

/// Joins the two financial branches into one [`crate::fallback::FinancialSection`].
struct FinancialJoin(Arc<PipelineDeps>);

#[async_trait]
impl NodeHandler for FinancialJoin {
    async fn run(&self, input: NodeInput) -> Result<NodeOutput, HandlerError> {
        let record = company(&input)?;
        let branch = input
            .artifact(nodes::ROUTER)
            .and_then(|v| v.get("branch"))
            .and_then(Value::as_str)
            .ok_or_else(|| failed("missing router decision"))?;

        let section = if branch == BRANCH_NO {
            let lookup = match input.artifact(nodes::ALT_FINANCIALS) {
                Some(v) => serde_json::from_value::<AltLookup>(v.clone()).map_err(failed)?,
                None => AltLookup {
                    hit: None,
                    notes: vec!["The third-party lookup did not complete.".into()],
                },
            };
            decide(RegistryOutcome::NotAttempted, Some(lookup))
        } else {
            let outcome = match input.artifact(nodes::FIN_SUMMARY) {
                Some(v) => {
                    let fins: Summary<FinancialStatementRecord> =
                        serde_json::from_value(v.clone()).map_err(failed)?;
                    let events = match input.artifact(nodes::MOD_SUMMARY) {
                        Some(m) => {
                            serde_json::from_value::<Summary<CorporateEvent>>(m.clone())
                                .map_err(failed)?
                                .items
                        }
                        None => Vec::new(),
                    };
                    if fins.items.is_empty() {
                        RegistryOutcome::Empty
                    } else {
                        RegistryOutcome::Success {
                            records: fins.items,
                            events,
                        }
                    }
                }
                None => RegistryOutcome::Failed {
                    reason: input
                        .degraded
                        .iter()
                        .map(|d| format!("{}: {}", d.node_id, d.reason))
                        .collect::<Vec<_>>()
                        .join("; "),
                },
            };
            if registry_suffices(&outcome) {
                decide(outcome, None)
            } else {
                resolve_financials(&record, outcome, &self.0.alt).await
            }
        };
        section.validate().map_err(failed)?;
        let mut output = NodeOutput::new(to_value(&section));
        for d in &input.degraded {
            output = output.with_note(format!("absorbed gap from {}: {}", d.node_id, d.reason));
        }
        Ok(output)
    }
}

struct RenderReport(Arc<PipelineDeps>);

#[async_trait]
impl NodeHandler for RenderReport {
    async fn run(&self, input: NodeInput) -> Result<NodeOutput, HandlerError> {
        let report = assemble_from(&input.upstream).map_err(failed)?;
        let html = render_html(&report);
        let dir = self.0.out_dir.join(&input.run_id);
        tokio::fs::create_dir_all(&dir).await.map_err(failed)?;
        let path = dir.join("report.html");
        tokio::fs::write(&path, &html).await.map_err(failed)?;
        Ok(NodeOutput::new(to_value(&RenderedReport {
            path,
            sha256: crate::registry::sha256_hex(html.as_bytes()),
            state: report.state().marker().to_string(),
        })))
    }
}

struct Deliver(Arc<PipelineDeps>);

#[async_trait]
impl NodeHandler for Deliver {
    async fn run(&self, input: NodeInput) -> Result<NodeOutput, HandlerError> {
        let rendered: RenderedReport = typed(&input, nodes::RENDER)?;
        let record = company(&input)?;
        let trigger: TriggerPayload = typed(&input, nodes::TRIGGER)?;
        let request = DeliveryRequest {
            run_id: input.run_id.clone(),
            recipient: trigger.requested_by,
            report_path: rendered.path,
            subject: format!("Due diligence report: {}", record.name),
        };
        let sink = self.0.sink.name().to_string();
        let outcome = match self.0.sink.deliver(&request).await {
            Ok(receipt) => DeliveryOutcome {
                delivered: true,
                sink,
                location: Some(receipt.location),
                error: None,
            },
            Err(e) => {
                tracing::warn!(run = %input.run_id, error = %e, "report delivery failed");
                DeliveryOutcome {
                    delivered: false,
                    sink,
                    location: None,
                    error: Some(e.to_string()),
                }
            }
        };
        let note = match &outcome.location {
            Some(location) => format!("delivered via {}: {location}", outcome.sink),
            None => format!("undelivered via {}", outcome.sink),
        };
        Ok(NodeOutput::new(to_value(&outcome)).with_note(note))
    }
}

/// Handler bindings for every key used by the bundled graph.
pub fn handlers(deps: Arc<PipelineDeps>) -> HandlerRegistry {
    let agent = |role| AgentNode {
        deps: deps.clone(),
        role,
    };
    HandlerRegistry::new()
        .with("webhook", Webhook)
        .with("intake", Intake(deps.clone()))
        .with("context_agent", agent(AgentRole::ContextAgent))
        .with("source_mapper", agent(AgentRole::SourceMapper))
        .with("sector", agent(AgentRole::Sector))
        .with("competition", agent(AgentRole::Competition))
        .with("news", agent(AgentRole::News))
        .with("signals", agent(AgentRole::Signals))
        .with("registry_router", RegistryRouter)
        .with("registry_index", RegistryIndexNode(deps.clone()))
        .with("classify", Classify(deps.clone()))
        .with("fetch_documents", FetchDocuments(deps.clone()))
        .with("extract_documents", ExtractDocuments(deps.clone()))
        .with("fin_summary", FinSummaryNode(deps.clone()))
        .with("mod_summary", ModSummaryNode(deps.clone()))
        .with("alt_financials", AltFinancialsNode(deps.clone()))
        .with("financial_join", FinancialJoin(deps.clone()))
        .with("researcher", agent(AgentRole::Researcher))
        .with("analyst", agent(AgentRole::Analyst))
        .with("overall_info", agent(AgentRole::OverallInfo))
        .with("render_report", RenderReport(deps.clone()))
        .with("deliver", Deliver(deps))
}

/// The bundled graph bound to a set of dependencies.
pub struct Pipeline {
    engine: Engine,
    deps: Arc<PipelineDeps>,
}

impl Pipeline {
    pub fn new(deps: PipelineDeps) -> Result<Self, EngineError> {
        Self::with_graph(bundled_graph(), deps)
    }

    pub fn with_graph(graph: WorkflowGraph, deps: PipelineDeps) -> Result<Self, EngineError> {
        let deps = Arc::new(deps);
        let engine = Engine::new(graph, handlers(deps.clone()))?;
        Ok(Self { engine, deps })
    }

    pub fn graph(&self) -> &ValidatedGraph {
        self.engine.graph()
    }

    pub fn deps(&self) -> &PipelineDeps {
        &self.deps
    }

    pub async fn run(&self, run_id: &str, trigger: &TriggerPayload) -> RunContext {
        self.engine.execute(run_id, to_value(trigger)).await
    }

    pub async fn run_observed(
        &self,
        run_id: &str,
        trigger: &TriggerPayload,
        observer: &dyn RunObserver,
    ) -> RunContext {
        self.engine
            .execute_observed(run_id, to_value(trigger), observer)
            .await
    }
}

/// Pulls the rendered report location out of a finished run.
pub fn rendered_report(ctx: &RunContext) -> Option<RenderedReport> {
    ctx.artifact(nodes::RENDER)
        .and_then(|v| serde_json::from_value(v.as_ref().clone()).ok())
}

pub fn delivery_outcome(ctx: &RunContext) -> Option<DeliveryOutcome> {
    ctx.artifact(nodes::DELIVER)
        .and_then(|v| serde_json::from_value(v.as_ref().clone()).ok())
}

/// Agent output of a node, if it ran.
pub fn agent_output(ctx: &RunContext, node: &str) -> Option<AgentOutput> {
    ctx.artifact(node)
        .and_then(|v| serde_json::from_value(v.as_ref().clone()).ok())
}
