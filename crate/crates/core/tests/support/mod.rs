//! Independent oracles shared by the integration and acceptance tests. None of
//! this code calls into the validator, scheduler or renderer it checks.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use diligence_core::engine::{
    EdgeSpec, FnHandler, HandlerError, HandlerRegistry, NodeInput, NodeKind, NodeOutput,
    WorkflowGraph,
};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::json;

// ---------------------------------------------------------------- graphs

/// Acceptance verdict for a workflow graph, derived from first principles:
/// Kahn's algorithm for acyclicity, explicit path enumeration for trigger
/// reachability and terminal reachability, and the router labelling rules.
pub fn oracle_accepts(graph: &WorkflowGraph) -> bool {
    let ids: Vec<&str> = graph.nodes.iter().map(|n| n.id.as_str()).collect();
    let unique: BTreeSet<&str> = ids.iter().copied().collect();
    if unique.len() != ids.len() || ids.iter().any(|id| id.is_empty()) {
        return false;
    }
    let kind = |id: &str| graph.nodes.iter().find(|n| n.id == id).map(|n| n.kind);
    let triggers: Vec<&str> = graph
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Trigger)
        .map(|n| n.id.as_str())
        .collect();
    if triggers.len() != 1 {
        return false;
    }

    let mut pairs = BTreeSet::new();
    for e in &graph.edges {
        if kind(&e.from).is_none() || kind(&e.to).is_none() {
            return false;
        }
        if !pairs.insert((e.from.as_str(), e.to.as_str())) {
            return false;
        }
        let from_router = kind(&e.from) == Some(NodeKind::Router);
        if from_router != e.branch_label.is_some() {
            return false;
        }
    }
    for router in graph.nodes.iter().filter(|n| n.kind == NodeKind::Router) {
        let labels: Vec<&str> = graph
            .edges
            .iter()
            .filter(|e| e.from == router.id)
            .filter_map(|e| e.branch_label.as_deref())
            .collect();
        let distinct: BTreeSet<&str> = labels.iter().copied().collect();
        if labels.len() < 2 || distinct.len() != labels.len() {
            return false;
        }
    }

    kahn_is_acyclic(&ids, &graph.edges)
        && every_node_on_trigger_to_terminal_path(graph, triggers[0])
}

fn kahn_is_acyclic(ids: &[&str], edges: &[EdgeSpec]) -> bool {
    let mut indegree: BTreeMap<&str, usize> = ids.iter().map(|id| (*id, 0)).collect();
    for e in edges {
        *indegree.get_mut(e.to.as_str()).unwrap() += 1;
    }
    let mut queue: VecDeque<&str> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(id, _)| *id)
        .collect();
    let mut removed = 0;
    while let Some(id) = queue.pop_front() {
        removed += 1;
        for e in edges.iter().filter(|e| e.from == id) {
            let d = indegree.get_mut(e.to.as_str()).unwrap();
            *d -= 1;
            if *d == 0 {
                queue.push_back(e.to.as_str());
            }
        }
    }
    removed == ids.len()
}

/// Enumerates every simple path starting at the trigger. A node is accepted
/// when some path reaches it and some path through it ends at a Render or
/// Deliver node.
fn every_node_on_trigger_to_terminal_path(graph: &WorkflowGraph, trigger: &str) -> bool {
    let terminal = |id: &str| {
        graph
            .nodes
            .iter()
            .any(|n| n.id == id && matches!(n.kind, NodeKind::Render | NodeKind::Deliver))
    };
    let mut reached = BTreeSet::new();
    let mut path = vec![trigger.to_string()];
    enumerate(graph, &mut path, &mut reached);
    if reached.len() != graph.nodes.len() {
        return false;
    }
    // Terminal reachability: enumerate forward paths from each node.
    graph.nodes.iter().all(|n| {
        let mut seen = BTreeSet::new();
        let mut path = vec![n.id.clone()];
        enumerate(graph, &mut path, &mut seen);
        seen.iter().any(|id| terminal(id))
    })
}

fn enumerate(graph: &WorkflowGraph, path: &mut Vec<String>, seen: &mut BTreeSet<String>) {
    let last = path.last().unwrap().clone();
    seen.insert(last.clone());
    for e in graph.edges.iter().filter(|e| e.from == last) {
        if path.contains(&e.to) {
            continue;
        }
        path.push(e.to.clone());
        enumerate(graph, path, seen);
        path.pop();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    Reverse,
    Add,
}

/// Applies one random edge reversal or edge addition.
pub fn mutate(graph: &WorkflowGraph, rng: &mut impl Rng) -> (WorkflowGraph, Mutation) {
    let mut g = graph.clone();
    if rng.gen_bool(0.5) {
        let i = rng.gen_range(0..g.edges.len());
        let e = &mut g.edges[i];
        std::mem::swap(&mut e.from, &mut e.to);
        (g, Mutation::Reverse)
    } else {
        let from = g.nodes.choose(rng).unwrap().clone();
        let to = g.nodes.choose(rng).unwrap().clone();
        let edge = if from.kind == NodeKind::Router && rng.gen_bool(0.7) {
            EdgeSpec::branch(&from.id, &to.id, format!("extra-{}", rng.gen_range(0..3)))
        } else {
            EdgeSpec::new(&from.id, &to.id)
        };
        g.edges.push(edge);
        (g, Mutation::Add)
    }
}

// ---------------------------------------------------------------- stubs

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Behaviour {
    Succeed,
    Fail,
    /// Transport error on the first attempt only.
    FlakyOnce,
    Panic,
}

#[derive(Debug, Clone)]
pub struct Span {
    pub node: String,
    pub start: Instant,
    pub end: Instant,
}

/// Handler-side record of when each stub ran, independent of engine ticks.
#[derive(Debug, Clone, Default)]
pub struct SpanLog(Arc<Mutex<Vec<Span>>>);

impl SpanLog {
    pub fn spans(&self) -> Vec<Span> {
        self.0.lock().unwrap().clone()
    }

    pub fn span(&self, node: &str) -> Option<Span> {
        self.spans().into_iter().rev().find(|s| s.node == node)
    }

    pub fn attempts(&self, node: &str) -> usize {
        self.spans().iter().filter(|s| s.node == node).count()
    }
}

#[derive(Debug, Clone)]
pub struct StubPlan {
    pub max_latency_ms: u64,
    pub seed: u64,
    /// Label every router returns.
    pub route: String,
    pub behaviours: BTreeMap<String, Behaviour>,
}

impl StubPlan {
    pub fn new(seed: u64, max_latency_ms: u64, route: &str) -> Self {
        Self {
            max_latency_ms,
            seed,
            route: route.to_string(),
            behaviours: BTreeMap::new(),
        }
    }

    pub fn with(mut self, node: &str, behaviour: Behaviour) -> Self {
        self.behaviours.insert(node.to_string(), behaviour);
        self
    }
}

/// Binds every handler key of `graph` to a stub that sleeps for a random
/// latency, logs its span and echoes the ids of the upstream artifacts it saw.
pub fn stub_handlers(graph: &WorkflowGraph, plan: &StubPlan, log: &SpanLog) -> HandlerRegistry {
    let mut latencies: BTreeMap<String, u64> = BTreeMap::new();
    let mut rng = StdRng::seed_from_u64(plan.seed);
    for node in &graph.nodes {
        latencies.insert(node.id.clone(), rng.gen_range(0..=plan.max_latency_ms));
    }
    let routers: BTreeSet<String> = graph
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Router)
        .map(|n| n.id.clone())
        .collect();
    let shared = Arc::new((latencies, routers, plan.clone(), log.clone()));
    let mut registry = HandlerRegistry::new();
    let keys: BTreeSet<&str> = graph.nodes.iter().map(|n| n.handler_key.as_str()).collect();
    for key in keys {
        let shared = shared.clone();
        registry = registry.with(
            key,
            FnHandler(move |input: NodeInput| {
                let shared = shared.clone();
                async move {
                    let (latencies, routers, plan, log) = &*shared;
                    let node = input.node_id.clone();
                    let start = Instant::now();
                    tokio::time::sleep(Duration::from_millis(latencies[&node])).await;
                    let first_attempt = log.attempts(&node) == 0;
                    log.0.lock().unwrap().push(Span {
                        node: node.clone(),
                        start,
                        end: Instant::now(),
                    });
                    match plan.behaviours.get(&node).copied().unwrap_or(Behaviour::Succeed) {
                        Behaviour::Succeed => {}
                        Behaviour::Fail => return Err(HandlerError::failed(format!("{node} injected failure"))),
                        Behaviour::FlakyOnce if first_attempt => {
                            return Err(HandlerError::Transport(format!("{node} connection reset")))
                        }
                        Behaviour::FlakyOnce => {}
                        Behaviour::Panic => panic!("{node} injected panic"),
                    }
                    let payload = json!({
                        "node": node,
                        "saw": input.upstream.keys().collect::<Vec<_>>(),
                        "degraded": input.degraded.iter().map(|d| d.node_id.clone()).collect::<Vec<_>>(),
                    });
                    Ok(if routers.contains(&node) {
                        NodeOutput::routed(payload, plan.route.clone())
                    } else {
                        NodeOutput::new(payload)
                    })
                }
            }),
        );
    }
    registry
}

// ---------------------------------------------------------------- html

#[derive(Debug, Clone)]
struct Element {
    name: String,
    attrs: BTreeMap<String, String>,
    /// Set on `data-claim` elements once a citation anchor closes inside them.
    anchored: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Open {
        name: String,
        attrs: BTreeMap<String, String>,
    },
    Close(String),
    Text(String),
}

const VOID: [&str; 8] = ["meta", "br", "hr", "img", "input", "link", "col", "wbr"];

/// Minimal tokenizer for the well-formed markup the renderer emits.
pub fn tokenize(html: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut rest = html;
    while !rest.is_empty() {
        if let Some(after) = rest.strip_prefix('<') {
            let end = after.find('>').expect("unterminated tag");
            let inner = &after[..end];
            rest = &after[end + 1..];
            if inner.starts_with('!') {
                continue;
            }
            if let Some(name) = inner.strip_prefix('/') {
                tokens.push(Token::Close(name.trim().to_ascii_lowercase()));
                continue;
            }
            let (name, attr_text) = inner.split_once(char::is_whitespace).unwrap_or((inner, ""));
            tokens.push(Token::Open {
                name: name.trim_end_matches('/').to_ascii_lowercase(),
                attrs: parse_attrs(attr_text),
            });
        } else {
            let end = rest.find('<').unwrap_or(rest.len());
            let raw = &rest[..end];
            rest = &rest[end..];
            tokens.push(Token::Text(
                html_escape::decode_html_entities(raw).into_owned(),
            ));
        }
    }
    tokens
}

fn parse_attrs(text: &str) -> BTreeMap<String, String> {
    let mut attrs = BTreeMap::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let name_end = rest
            .find(|c: char| c == '=' || c.is_whitespace())
            .unwrap_or(rest.len());
        let name = rest[..name_end].trim_end_matches('/').to_string();
        rest = rest[name_end..].trim_start();
        let mut value = String::new();
        if let Some(after) = rest.strip_prefix('=') {
            let after = after.trim_start();
            let quote = after.chars().next().unwrap();
            let close = after[1..].find(quote).expect("quoted attribute") + 1;
            value = html_escape::decode_html_entities(&after[1..close]).into_owned();
            rest = after[close + 1..].trim_start();
        }
        if !name.is_empty() {
            attrs.insert(name, value);
        }
    }
    attrs
}

/// Roles whose numerals are structure, not claims.
pub const EXEMPT_ROLES: [&str; 7] = [
    "record",
    "period",
    "date",
    "score",
    "horizon",
    "source",
    "citation-index",
];

#[derive(Debug, Default)]
pub struct Audit {
    /// Text runs containing a digit outside any cited or exempt context.
    pub uncited_numerals: Vec<String>,
    /// Digit-bearing `data-claim` elements that closed without an anchor.
    pub unanchored_claims: Vec<String>,
    /// Anchor targets (`cite-N`) referenced in the body.
    pub anchor_targets: BTreeSet<String>,
    /// `id`s present in the document.
    pub ids: BTreeSet<String>,
    pub unbalanced: bool,
}

impl Audit {
    pub fn dangling_anchors(&self) -> Vec<&String> {
        self.anchor_targets
            .iter()
            .filter(|t| !self.ids.contains(*t))
            .collect()
    }

    pub fn clean(&self) -> bool {
        self.uncited_numerals.is_empty()
            && self.unanchored_claims.is_empty()
            && self.dangling_anchors().is_empty()
            && !self.unbalanced
    }
}

fn is_anchor_sup(el: &Element) -> bool {
    el.name == "sup" && el.attrs.get("class").is_some_and(|c| c == "cite")
}

/// Walks the document with a tag stack. Digits inside a `data-claim` element
/// are only credited if that element ends up holding an anchor.
pub fn audit_html(html: &str) -> Audit {
    let mut audit = Audit::default();
    let mut stack: Vec<Element> = Vec::new();
    // Digit-bearing text waiting on its enclosing claim: (claim depth, text).
    let mut pending: Vec<(usize, String)> = Vec::new();

    for token in tokenize(html) {
        match token {
            Token::Open { name, attrs } => {
                if let Some(id) = attrs.get("id") {
                    audit.ids.insert(id.clone());
                }
                if name == "a" {
                    if let Some(target) = attrs.get("href").and_then(|h| h.strip_prefix('#')) {
                        if stack.iter().any(is_anchor_sup) {
                            audit.anchor_targets.insert(target.to_string());
                        }
                    }
                }
                if !VOID.contains(&name.as_str()) {
                    stack.push(Element {
                        name,
                        attrs,
                        anchored: false,
                    });
                }
            }
            Token::Close(name) => {
                let Some(el) = stack.pop() else {
                    audit.unbalanced = true;
                    break;
                };
                if el.name != name {
                    audit.unbalanced = true;
                    break;
                }
                if is_anchor_sup(&el) {
                    if let Some(claim) = stack
                        .iter_mut()
                        .rev()
                        .find(|e| e.attrs.contains_key("data-claim"))
                    {
                        claim.anchored = true;
                    }
                }
                if el.attrs.contains_key("data-claim") {
                    let depth = stack.len();
                    let (mine, others): (Vec<_>, Vec<_>) =
                        pending.drain(..).partition(|(d, _)| *d == depth);
                    pending = others;
                    if !el.anchored && !mine.is_empty() {
                        audit.unanchored_claims.push(el.name.clone());
                        audit
                            .uncited_numerals
                            .extend(mine.into_iter().map(|(_, t)| t));
                    }
                }
            }
            Token::Text(text) => {
                if !text.chars().any(|c| c.is_ascii_digit()) {
                    continue;
                }
                if stack.iter().any(|e| e.name == "title" || e.name == "style") {
                    continue;
                }
                let exempt = stack.iter().any(|e| {
                    is_anchor_sup(e)
                        || e.attrs
                            .get("data-role")
                            .is_some_and(|r| EXEMPT_ROLES.contains(&r.as_str()))
                });
                if exempt {
                    continue;
                }
                match stack
                    .iter()
                    .rposition(|e| e.attrs.contains_key("data-claim"))
                {
                    Some(depth) => pending.push((depth, text)),
                    None => audit.uncited_numerals.push(text),
                }
            }
        }
    }
    if !stack.is_empty() {
        audit.unbalanced = true;
    }
    audit
}

/// Inner markup of the element whose opening tag contains `id="<id>"`.
pub fn element_by_id<'a>(html: &'a str, tag: &str, id: &str) -> Option<&'a str> {
    let open = html.find(&format!("<{tag} id=\"{id}\""))?;
    let body_start = open + html[open..].find('>')? + 1;
    let close = html[body_start..].find(&format!("</{tag}>"))?;
    Some(&html[body_start..body_start + close])
}

/// Per `data-claim` element of a fragment: numerals outside anchors and
/// exempt roles, and the number of citation anchors inside it.
pub fn claim_cells(fragment: &str) -> Vec<(Vec<String>, usize)> {
    let mut stack: Vec<Element> = Vec::new();
    // Open claims: (stack depth, numerals, anchors).
    let mut open: Vec<(usize, Vec<String>, usize)> = Vec::new();
    let mut cells = Vec::new();
    for token in tokenize(fragment) {
        match token {
            Token::Open { name, attrs } => {
                if VOID.contains(&name.as_str()) {
                    continue;
                }
                if attrs.contains_key("data-claim") {
                    open.push((stack.len(), Vec::new(), 0));
                }
                stack.push(Element {
                    name,
                    attrs,
                    anchored: false,
                });
            }
            Token::Close(_) => {
                let el = stack.pop().expect("balanced fragment");
                if is_anchor_sup(&el) {
                    if let Some(claim) = open.last_mut() {
                        claim.2 += 1;
                    }
                }
                if open.last().is_some_and(|(d, _, _)| *d == stack.len()) {
                    let (_, nums, anchors) = open.pop().unwrap();
                    cells.push((nums, anchors));
                }
            }
            Token::Text(text) => {
                let exempt = stack.iter().any(|e| {
                    is_anchor_sup(e)
                        || e.attrs
                            .get("data-role")
                            .is_some_and(|r| EXEMPT_ROLES.contains(&r.as_str()))
                });
                if exempt {
                    continue;
                }
                match open.last_mut() {
                    Some(claim) => claim.1.extend(numerals(&text)),
                    None => cells.push((numerals(&text), 0)),
                }
            }
        }
    }
    cells.retain(|(nums, anchors)| !nums.is_empty() || *anchors > 0);
    cells
}

/// Maximal runs of digits joined by `.`, `,` or `/`, so `1.250.000,00` is one numeral.
pub fn numerals(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let joins = matches!(c, '.' | ',' | '/')
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        if c.is_ascii_digit() || joins {
            current.push(c);
        } else if !current.is_empty() {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// Number of citation anchors in a fragment.
pub fn count_anchors(fragment: &str) -> usize {
    fragment.matches("<sup class=\"cite\"").count()
}

// ---------------------------------------------------------------- fuzz

use diligence_core::agents::{AgentRole, CompletionProvider, CompletionRequest, ProviderError};
use serde_json::Value;

/// Where a claim lives in a completion: the array of items (empty for the
/// payload root), the text fields that are claims, and the citation key.
struct ClaimSite {
    items: &'static [&'static str],
    fields: &'static [&'static str],
    cite_key: &'static str,
}

const fn site(
    items: &'static [&'static str],
    fields: &'static [&'static str],
    cite_key: &'static str,
) -> ClaimSite {
    ClaimSite {
        items,
        fields,
        cite_key,
    }
}

/// Claim-bearing fields per role: every field that is rendered into the report
/// or carries a quantitative statement another agent may repeat.
fn claim_sites(role: AgentRole) -> Vec<ClaimSite> {
    match role {
        AgentRole::SourceMapper => vec![site(&["sources"], &["rationale"], "citations")],
        AgentRole::Sector => vec![
            site(&["market_size"], &["label", "unit"], "citations"),
            site(&["trends"], &["text"], "citations"),
        ],
        AgentRole::Competition => vec![site(
            &["competitors"],
            &["name", "funding_status", "activity_note"],
            "citations",
        )],
        AgentRole::News => vec![site(&["events"], &["headline"], "citation")],
        AgentRole::Signals => vec![site(&["signals"], &["metric"], "citation")],
        AgentRole::Researcher => vec![
            site(&["developments"], &["text"], "citations"),
            site(&["blind_spots"], &["text"], "citations"),
        ],
        AgentRole::Analyst => vec![
            site(&[], &["executive_summary"], "summary_citations"),
            site(&["recommendations"], &["action"], "citations"),
        ],
        AgentRole::OverallInfo => vec![site(&[], &["summary"], "citations")],
        AgentRole::FinSummary => vec![site(&["records", "line_items"], &["amount"], "citation")],
        AgentRole::ModSummary => vec![site(&["events"], &["description"], "citation")],
        _ => vec![],
    }
}

pub const FUZZ_ROLES: [AgentRole; 10] = [
    AgentRole::SourceMapper,
    AgentRole::Sector,
    AgentRole::Competition,
    AgentRole::News,
    AgentRole::Signals,
    AgentRole::Researcher,
    AgentRole::Analyst,
    AgentRole::OverallInfo,
    AgentRole::FinSummary,
    AgentRole::ModSummary,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attack {
    /// Add a numeral to a claim field and drop the item's citations.
    InjectAndStrip,
    /// Drop the citations of an item that already states a number.
    StripOnly,
    /// Add a numeral and point the citation past the end of the list.
    OutOfRange,
    /// Add a numeral cited to a source that was never retrieved.
    FabricatedSource,
}

const ATTACKS: [Attack; 4] = [
    Attack::InjectAndStrip,
    Attack::StripOnly,
    Attack::OutOfRange,
    Attack::FabricatedSource,
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FuzzTarget {
    Agent(AgentRole),
    /// A third-party provider file under fixtures/altfin.
    AltProvider(String),
}

#[derive(Debug, Clone)]
pub struct AdversarialCase {
    pub index: usize,
    pub company: String,
    pub target: FuzzTarget,
    pub attack: Attack,
    /// The tampered completion or provider file.
    pub text: String,
    /// Numeral planted by the attack, if it planted one.
    pub planted: Option<String>,
}

/// Pointers to every (item object, field) pair that holds a string claim.
fn claim_pointers(payload: &Value, role: AgentRole) -> Vec<(String, String, &'static str)> {
    let mut found = Vec::new();
    for site in claim_sites(role) {
        let mut objects = vec![("/payload".to_string(), payload)];
        for key in site.items {
            let mut next = Vec::new();
            for (ptr, obj) in objects {
                match obj.get(*key) {
                    Some(Value::Array(items)) => next.extend(
                        items
                            .iter()
                            .enumerate()
                            .map(|(i, v)| (format!("{ptr}/{key}/{i}"), v)),
                    ),
                    Some(Value::Object(map)) => {
                        next.extend(map.iter().map(|(k, v)| (format!("{ptr}/{key}/{k}"), v)))
                    }
                    _ => {}
                }
            }
            objects = next;
        }
        for (ptr, obj) in objects {
            for field in site.fields {
                if obj.get(*field).is_some_and(Value::is_string) {
                    found.push((ptr.clone(), field.to_string(), site.cite_key));
                }
            }
        }
    }
    found
}

fn strip_cites(item: &mut Value, cite_key: &str) {
    if let Some(map) = item.as_object_mut() {
        map.remove(cite_key);
        if cite_key == "citations" || cite_key == "summary_citations" {
            map.insert(cite_key.to_string(), json!([]));
        }
    }
}

fn set_cite(item: &mut Value, cite_key: &str, index: usize) {
    let value = if cite_key == "citation" {
        json!(index)
    } else {
        json!([index])
    };
    item[cite_key] = value;
}

fn plant(value: &mut Value, field: &str, token: &str) {
    let current = value[field].as_str().unwrap_or_default().to_string();
    value[field] = if field == "amount" {
        json!(token)
    } else {
        json!(format!("{current} Grew {token} year on year."))
    };
}

fn planted_token(index: usize, amount: bool) -> String {
    if amount {
        format!(
            "{}.{:03}.{:03},{:02}",
            3 + index % 6,
            index % 997,
            (index * 7) % 1000,
            index % 100
        )
    } else {
        format!("{}.{}%", 200 + index, index % 10)
    }
}

fn has_numeral(item: &Value, fields: &[String]) -> bool {
    fields.iter().any(|f| {
        item.get(f)
            .and_then(Value::as_str)
            .is_some_and(|s| s.chars().any(|c| c.is_ascii_digit()))
    }) || item
        .as_object()
        .is_some_and(|m| m.values().any(Value::is_number) && m.contains_key("value"))
}

fn tamper(
    doc: &mut Value,
    ptr: &str,
    field: &str,
    cite_key: &str,
    attack: Attack,
    token: &str,
) -> Option<String> {
    let citations = doc["citations"].as_array().map_or(0, Vec::len);
    if attack == Attack::FabricatedSource {
        doc["citations"]
            .as_array_mut()
            .unwrap()
            .push(json!({"source_ref": format!("https://fabricated.example/{token}"), "page": 1}));
    }
    let item = doc.pointer_mut(ptr).unwrap();
    match attack {
        Attack::InjectAndStrip => {
            plant(item, field, token);
            strip_cites(item, cite_key);
            Some(token.to_string())
        }
        Attack::StripOnly => {
            strip_cites(item, cite_key);
            None
        }
        Attack::OutOfRange => {
            plant(item, field, token);
            set_cite(item, cite_key, citations + 3);
            Some(token.to_string())
        }
        Attack::FabricatedSource => {
            plant(item, field, token);
            set_cite(item, cite_key, citations);
            Some(token.to_string())
        }
    }
}

/// Company an alt entry would be served to, if that company ever consults
/// third parties (companies with registry filings never do).
fn alt_subject(
    db: &diligence_core::intake::CompanyDb,
    root: &std::path::Path,
    key: &str,
    entry: &Value,
) -> Option<String> {
    let alt_id = entry["alt_id"].as_str();
    let name = diligence_core::fallback::normalize_name(entry["name"].as_str().unwrap_or_default());
    let record = db.records().iter().find(|r| {
        let by_id = alt_id.is_some()
            && r.alt_identifiers
                .as_ref()
                .and_then(|m| m.get(key))
                .map(String::as_str)
                == alt_id;
        by_id || diligence_core::fallback::normalize_name(&r.name) == name
    })?;
    let filed = record.registration.as_ref().is_some_and(|reg| {
        root.join("fixtures/registry")
            .join(reg)
            .join("docs")
            .is_dir()
    });
    (!filed).then(|| record.company_id.clone())
}

/// Deterministic stream of adversarial completions and provider files built
/// from the checked-in fixtures.
pub fn adversarial_cases(root: &std::path::Path, count: usize, seed: u64) -> Vec<AdversarialCase> {
    let mut rng = StdRng::seed_from_u64(seed);
    let agents = root.join("fixtures/agents");
    let mut agent_sources: Vec<(String, AgentRole, Value)> = Vec::new();
    let mut companies: Vec<String> = std::fs::read_dir(&agents)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|c| !c.starts_with('_'))
        .collect();
    companies.sort();
    for company in &companies {
        for role in FUZZ_ROLES {
            let path = agents.join(company).join(format!("{}.json", role.slug()));
            if let Ok(text) = std::fs::read_to_string(&path) {
                let value: Value = serde_json::from_str(&text).unwrap();
                if !claim_pointers(&value["payload"], role).is_empty() {
                    agent_sources.push((company.clone(), role, value));
                }
            }
        }
    }
    let db = diligence_core::intake::load_company_db(root.join("data/companies.v1")).unwrap();
    let mut alt_files: Vec<std::path::PathBuf> = std::fs::read_dir(root.join("fixtures/altfin"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    alt_files.sort();

    let mut cases = Vec::with_capacity(count);
    while cases.len() < count {
        let index = cases.len();
        let attack = *ATTACKS.choose(&mut rng).unwrap();
        // Roughly one case in eight goes at a third-party provider.
        if rng.gen_ratio(1, 8) {
            let path = alt_files.choose(&mut rng).unwrap();
            let mut file: Value =
                serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
            let key = file["identifier_key"].as_str().unwrap().to_string();
            let reachable: Vec<(usize, String)> = file["entries"]
                .as_array()
                .unwrap()
                .iter()
                .enumerate()
                .filter_map(|(i, entry)| alt_subject(&db, root, &key, entry).map(|c| (i, c)))
                .collect();
            let Some((e, company)) = reachable.choose(&mut rng).cloned() else {
                continue;
            };
            // A provider's citation list is its own retrieval record, so a
            // fabricated source is not an attack on third-party entries.
            let attack = if attack == Attack::FabricatedSource {
                Attack::InjectAndStrip
            } else {
                attack
            };
            let numeric = |f: &Value| {
                f["value"].is_number()
                    || [&f["value"], &f["name"]].iter().any(|v| {
                        v.as_str()
                            .is_some_and(|s| s.chars().any(|c| c.is_ascii_digit()))
                    })
            };
            let candidates: Vec<usize> = file["entries"][e]["fields"]
                .as_array()
                .map(|fs| {
                    (0..fs.len())
                        .filter(|i| attack != Attack::StripOnly || numeric(&fs[*i]))
                        .collect()
                })
                .unwrap_or_default();
            let Some(f) = candidates.choose(&mut rng) else {
                continue;
            };
            let ptr = format!("/fields/{f}");
            let mut entry = file["entries"][e].take();
            let field = if rng.gen_bool(0.5) { "name" } else { "value" };
            if attack != Attack::StripOnly
                && field == "value"
                && !entry.pointer(&ptr).unwrap()["value"].is_string()
            {
                entry.pointer_mut(&ptr).unwrap()["value"] = json!("");
            }
            let planted = tamper(
                &mut entry,
                &ptr,
                field,
                "citation",
                attack,
                &planted_token(index, false),
            );
            file["entries"][e] = entry;
            cases.push(AdversarialCase {
                index,
                company,
                target: FuzzTarget::AltProvider(
                    path.file_name().unwrap().to_string_lossy().into_owned(),
                ),
                attack,
                text: serde_json::to_string_pretty(&file).unwrap(),
                planted,
            });
            continue;
        }

        let (company, role, original) = agent_sources.choose(&mut rng).unwrap().clone();
        let mut doc = original.clone();
        let mut pointers = claim_pointers(&doc["payload"], role);
        if attack == Attack::StripOnly {
            pointers.retain(|(ptr, _, _)| {
                let item = doc.pointer(ptr).unwrap();
                let fields: Vec<String> = claim_sites(role)
                    .iter()
                    .flat_map(|s| s.fields.iter().map(|f| f.to_string()))
                    .collect();
                has_numeral(item, &fields)
            });
            if pointers.is_empty() {
                continue;
            }
        }
        let (ptr, field, cite_key) = pointers.choose(&mut rng).unwrap().clone();
        let token = planted_token(index, field == "amount");
        let planted = tamper(&mut doc, &ptr, &field, cite_key, attack, &token);
        cases.push(AdversarialCase {
            index,
            company,
            target: FuzzTarget::Agent(role),
            attack,
            text: serde_json::to_string(&doc).unwrap(),
            planted,
        });
    }
    cases
}

/// Serves one tampered completion for (subject, role) and delegates the rest.
pub struct OverrideProvider {
    pub inner: Arc<dyn CompletionProvider>,
    pub subject: String,
    pub role: AgentRole,
    pub text: String,
}

#[async_trait::async_trait]
impl CompletionProvider for OverrideProvider {
    fn identity(&self) -> String {
        format!("override:{}", self.inner.identity())
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        if request.role == self.role && request.subject == self.subject {
            return Ok(self.text.clone());
        }
        self.inner.complete(request).await
    }
}

/// Node that runs each agent role in the bundled graph.
pub fn node_for(role: AgentRole) -> &'static str {
    match role {
        AgentRole::SourceMapper => "SourceMapper",
        AgentRole::Sector => "Sector",
        AgentRole::Competition => "Competition",
        AgentRole::News => "News",
        AgentRole::Signals => "Signals",
        AgentRole::Researcher => "Researcher",
        AgentRole::Analyst => "Analyst",
        AgentRole::OverallInfo => "OverallInfo",
        AgentRole::FinSummary => "FinSummary",
        AgentRole::ModSummary => "ModSummary",
        other => panic!("{other:?} is not fuzzed"),
    }
}

#[derive(Debug, Clone)]
pub struct FuzzVerdict {
    pub case: usize,
    /// The tampered content was refused by validation.
    pub rejected: bool,
    /// A report was rendered for the run.
    pub rendered: bool,
    /// Uncited numerals found in the rendered report.
    pub uncited: Vec<String>,
    /// The planted numeral appears in the rendered report.
    pub leaked: bool,
    pub detail: String,
}

impl FuzzVerdict {
    pub fn passed(&self) -> bool {
        self.rejected && self.uncited.is_empty() && !self.leaked
    }
}

/// Runs the full pipeline with one tampered input and judges the outcome.
pub async fn run_case(
    case: &AdversarialCase,
    layout: &diligence_core::setup::FixtureLayout,
    registry_url: &str,
    out_dir: &std::path::Path,
) -> FuzzVerdict {
    use diligence_core::fallback::{
        AltChain, AltFinancialsProvider, FinancialSection, FixtureAltProvider,
    };
    use diligence_core::intake::TriggerPayload;
    use diligence_core::pipeline::{rendered_report, Pipeline};

    let mut deps = match &case.target {
        FuzzTarget::Agent(role) => {
            let completion = Arc::new(OverrideProvider {
                inner: layout.completion(),
                subject: case.company.clone(),
                role: *role,
                text: case.text.clone(),
            });
            layout.deps_with(completion, registry_url, out_dir).unwrap()
        }
        FuzzTarget::AltProvider(_) => layout.deps(registry_url, out_dir).unwrap(),
    };
    if let FuzzTarget::AltProvider(file_name) = &case.target {
        let mut files: Vec<std::path::PathBuf> = std::fs::read_dir(layout.altfin())
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        let providers: Vec<Arc<dyn AltFinancialsProvider>> = files
            .iter()
            .map(|path| {
                let provider = if path.file_name().unwrap().to_string_lossy() == *file_name {
                    FixtureAltProvider::from_json(&case.text).unwrap()
                } else {
                    FixtureAltProvider::load(path).unwrap()
                };
                Arc::new(provider) as Arc<dyn AltFinancialsProvider>
            })
            .collect();
        deps.alt = AltChain::new(providers);
    }
    let tampered_provider = match &case.target {
        FuzzTarget::AltProvider(_) => serde_json::from_str::<Value>(&case.text).unwrap()
            ["provider"]
            .as_str()
            .map(str::to_string),
        FuzzTarget::Agent(_) => None,
    };

    let pipeline = Pipeline::new(deps).unwrap();
    let trigger = TriggerPayload::new(case.company.as_str(), "fuzz@fund.example");
    let ctx = pipeline
        .run(&format!("fuzz-{}", case.index), &trigger)
        .await;

    let (rejected, detail) = match &case.target {
        FuzzTarget::Agent(role) => {
            let status = ctx.status(node_for(*role)).unwrap();
            let error = status.error.clone().unwrap_or_default();
            (
                status.state == diligence_core::engine::NodeState::Failed
                    && error.contains("output rejected"),
                error,
            )
        }
        FuzzTarget::AltProvider(_) => match ctx.artifact("FinancialJoin") {
            Some(artifact) => {
                let section: FinancialSection =
                    serde_json::from_value((**artifact).clone()).unwrap();
                let used = section
                    .third_party
                    .as_ref()
                    .map(|t| Some(t.provider.clone()) == tampered_provider);
                let refused = used != Some(true) && section.provenance_note.contains("rejected");
                (refused, section.provenance_note)
            }
            None => (false, "financial join did not run".into()),
        },
    };

    let mut verdict = FuzzVerdict {
        case: case.index,
        rejected,
        rendered: false,
        uncited: Vec::new(),
        leaked: false,
        detail,
    };
    if let Some(report) = rendered_report(&ctx) {
        let html = std::fs::read_to_string(&report.path).unwrap();
        verdict.rendered = true;
        verdict.uncited = audit_html(&html).uncited_numerals;
        verdict.leaked = case
            .planted
            .as_ref()
            .is_some_and(|t| html.contains(t.trim_end_matches('%')));
    }
    verdict
}

// ---------------------------------------------------------------- citations

/// One cell of the financial table: row label, column period, the cell's own
/// text and the citation targets it anchors.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub metric: String,
    pub period: String,
    pub text: String,
    pub cites: Vec<String>,
}

/// Reads `table[data-role=financials]` back into cells.
pub fn financial_grid(html: &str) -> Vec<GridCell> {
    let mut periods = Vec::new();
    let mut cells = Vec::new();
    let mut in_table = false;
    let mut in_period = false;
    let mut in_row_head = false;
    let mut in_sup = false;
    let mut metric = String::new();
    let mut column = 0usize;
    let mut cell: Option<GridCell> = None;
    for token in tokenize(html) {
        match token {
            Token::Open { name, attrs } => {
                if name == "table" && attrs.get("data-role").is_some_and(|r| r == "financials") {
                    in_table = true;
                }
                if !in_table {
                    continue;
                }
                match name.as_str() {
                    "tr" => column = 0,
                    "th" if attrs.get("data-role").is_some_and(|r| r == "period") => {
                        in_period = true;
                        periods.push(String::new());
                    }
                    "th" if attrs.get("scope").is_some_and(|s| s == "row") => {
                        in_row_head = true;
                        metric.clear();
                    }
                    "td" => {
                        cell = Some(GridCell {
                            metric: metric.clone(),
                            period: periods.get(column).cloned().unwrap_or_default(),
                            text: String::new(),
                            cites: Vec::new(),
                        });
                        column += 1;
                    }
                    "sup" => in_sup = true,
                    "a" if in_sup => {
                        if let (Some(c), Some(target)) = (
                            cell.as_mut(),
                            attrs.get("href").and_then(|h| h.strip_prefix('#')),
                        ) {
                            c.cites.push(target.to_string());
                        }
                    }
                    _ => {}
                }
            }
            Token::Close(name) => match name.as_str() {
                "table" => in_table = false,
                "th" => {
                    in_period = false;
                    in_row_head = false;
                }
                "sup" => in_sup = false,
                "td" => cells.extend(cell.take()),
                _ => {}
            },
            Token::Text(text) if in_table => {
                if in_period {
                    periods.last_mut().unwrap().push_str(&text);
                } else if in_row_head {
                    metric.push_str(&text);
                } else if let Some(c) = cell.as_mut().filter(|_| !in_sup) {
                    c.text.push_str(&text);
                }
            }
            Token::Text(_) => {}
        }
    }
    cells
}

/// `cite-N` -> the citation entry's text, from `ol[data-role=citation-index]`.
pub fn citation_index(html: &str) -> BTreeMap<String, String> {
    let mut entries = BTreeMap::new();
    let mut in_index = false;
    let mut current: Option<(String, String)> = None;
    for token in tokenize(html) {
        match token {
            Token::Open { name, attrs } => {
                if name == "ol"
                    && attrs
                        .get("data-role")
                        .is_some_and(|r| r == "citation-index")
                {
                    in_index = true;
                } else if in_index && name == "li" {
                    current = attrs.get("id").map(|id| (id.clone(), String::new()));
                }
            }
            Token::Close(name) => {
                if name == "ol" {
                    in_index = false;
                } else if name == "li" {
                    entries.extend(current.take());
                }
            }
            Token::Text(text) => {
                if let Some((_, body)) = current.as_mut() {
                    body.push_str(&text);
                }
            }
        }
    }
    entries
}

/// Splits a registry citation entry (`DOC-ID, page N, retrieved ...`).
pub fn registry_citation(entry: &str) -> Option<(String, u32)> {
    let mut parts = entry.split(", ");
    let doc_id = parts.next()?.to_string();
    let page = parts.next()?.strip_prefix("page ")?.parse().ok()?;
    Some((doc_id, page))
}

/// `(doc_id, page, metric, fiscal_year, raw)` for every planted figure in a
/// registry MANIFEST.
pub fn manifest_plants(manifest: &Value) -> Vec<(String, u32, String, i32, String)> {
    let mut plants = Vec::new();
    for registration in manifest["registrations"]
        .as_object()
        .into_iter()
        .flat_map(|m| m.values())
    {
        for doc in registration["documents"].as_array().into_iter().flatten() {
            for plant in doc["planted"].as_array().into_iter().flatten() {
                plants.push((
                    doc["doc_id"].as_str().unwrap().to_string(),
                    plant["page"].as_u64().unwrap() as u32,
                    plant["metric"].as_str().unwrap().to_string(),
                    plant["fiscal_year"].as_i64().unwrap() as i32,
                    plant["raw"].as_str().unwrap().to_string(),
                ));
            }
        }
    }
    plants
}

/// Checks a rendered report's financial table against the MANIFEST: every
/// cell shows a planted figure and cites exactly the document and page it
/// was planted on. Returns the number of cells checked.
pub fn check_grid_against_manifest(html: &str, manifest: &Value) -> Result<usize, String> {
    let plants = manifest_plants(manifest);
    let index = citation_index(html);
    let grid = financial_grid(html);
    for cell in &grid {
        let year: i32 = cell
            .period
            .trim_start_matches("FY")
            .parse()
            .map_err(|_| format!("unparseable period {:?}", cell.period))?;
        let plant = plants
            .iter()
            .find(|p| p.2 == cell.metric && p.3 == year)
            .ok_or_else(|| format!("{} FY{year} not planted", cell.metric))?;
        if cell.text.trim() != plant.4 {
            return Err(format!(
                "{} FY{year}: shows {:?}, planted {:?}",
                cell.metric, cell.text, plant.4
            ));
        }
        let [cite] = cell.cites.as_slice() else {
            return Err(format!(
                "{} FY{year}: {} anchors",
                cell.metric,
                cell.cites.len()
            ));
        };
        let entry = index
            .get(cite)
            .ok_or_else(|| format!("{cite} missing from the citation index"))?;
        let (doc_id, page) = registry_citation(entry)
            .ok_or_else(|| format!("{cite} is not a registry citation: {entry}"))?;
        if (doc_id.as_str(), page) != (plant.0.as_str(), plant.1) {
            return Err(format!(
                "{} FY{year}: cites {doc_id} p{page}, planted on {} p{}",
                cell.metric, plant.0, plant.1
            ));
        }
    }
    Ok(grid.len())
}
