//! Workflow graph definition and structural validation.
//!
//! A [`WorkflowGraph`] is plain data, loaded from the declarative graph file.
//! [`validate_graph`] never fails: every broken rule comes back as a
//! [`Violation`] in the report. Execution requires a [`ValidatedGraph`], which
//! can only be built from a graph whose report is clean.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Trigger,
    Transform,
    Agent,
    Fetch,
    Router,
    Render,
    Deliver,
}

impl NodeKind {
    pub fn is_terminal(self) -> bool {
        matches!(self, NodeKind::Render | NodeKind::Deliver)
    }
}

/// What happens to the rest of the run when a node fails.
///
/// `Strict` skips every descendant and fails the run. `Degrade` skips the
/// contiguous run of degrade-policy descendants and lets the first strict
/// node downstream absorb the gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailurePolicy {
    #[default]
    Strict,
    Degrade,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
    #[serde(rename = "handler")]
    pub handler_key: String,
    #[serde(default, skip_serializing_if = "is_strict")]
    pub policy: FailurePolicy,
}

fn is_strict(policy: &FailurePolicy) -> bool {
    *policy == FailurePolicy::Strict
}

impl NodeSpec {
    pub fn new(id: impl Into<String>, kind: NodeKind, handler_key: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind,
            handler_key: handler_key.into(),
            policy: FailurePolicy::Strict,
        }
    }

    pub fn with_policy(mut self, policy: FailurePolicy) -> Self {
        self.policy = policy;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    #[serde(rename = "branch", default, skip_serializing_if = "Option::is_none")]
    pub branch_label: Option<String>,
}

impl EdgeSpec {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            branch_label: None,
        }
    }

    pub fn branch(
        from: impl Into<String>,
        to: impl Into<String>,
        label: impl Into<String>,
    ) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            branch_label: Some(label.into()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowGraph {
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<EdgeSpec>,
}

impl WorkflowGraph {
    pub fn from_json(text: &str) -> Result<Self, EngineError> {
        serde_json::from_str(text).map_err(|e| EngineError::GraphFile(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EngineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| EngineError::GraphFile(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn node(&self, id: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }
}

/// One broken structural rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Violation {
    EmptyNodeId {
        index: usize,
    },
    DuplicateNode {
        id: String,
    },
    TriggerCount {
        count: usize,
    },
    UnknownEndpoint {
        from: String,
        to: String,
        missing: String,
    },
    DuplicateEdge {
        from: String,
        to: String,
    },
    RouterFanOut {
        router: String,
        outgoing: usize,
    },
    UnlabeledBranch {
        router: String,
        to: String,
    },
    DuplicateBranchLabel {
        router: String,
        label: String,
    },
    LabelOnPlainEdge {
        from: String,
        to: String,
    },
    Cycle {
        nodes: Vec<String>,
    },
    Unreachable {
        node: String,
    },
    UnreachableTerminal {
        node: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyNodeId { index } => write!(f, "empty node id at position {index}"),
            Violation::DuplicateNode { id } => write!(f, "duplicate node id: {id}"),
            Violation::TriggerCount { count } => {
                write!(f, "expected exactly one Trigger node, found {count}")
            }
            Violation::UnknownEndpoint { from, to, missing } => {
                write!(f, "edge {from}->{to} references unknown node {missing}")
            }
            Violation::DuplicateEdge { from, to } => write!(f, "duplicate edge {from}->{to}"),
            Violation::RouterFanOut { router, outgoing } => {
                write!(
                    f,
                    "router {router} needs at least 2 outgoing edges, has {outgoing}"
                )
            }
            Violation::UnlabeledBranch { router, to } => {
                write!(f, "router edge {router}->{to} has no branch label")
            }
            Violation::DuplicateBranchLabel { router, label } => {
                write!(f, "router {router} repeats branch label {label:?}")
            }
            Violation::LabelOnPlainEdge { from, to } => {
                write!(
                    f,
                    "edge {from}->{to} carries a branch label but {from} is not a router"
                )
            }
            Violation::Cycle { nodes } => write!(f, "cycle detected: {}", nodes.join(",")),
            Violation::Unreachable { node } => {
                write!(f, "node {node} is not reachable from the trigger")
            }
            Violation::UnreachableTerminal { node } => {
                write!(
                    f,
                    "unreachable terminal: {node} reaches no Render or Deliver node"
                )
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return write!(f, "ok");
        }
        let lines: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        write!(f, "{}", lines.join("; "))
    }
}

pub fn validate_graph(graph: &WorkflowGraph) -> ValidationReport {
    let mut violations = Vec::new();

    let mut kinds: HashMap<&str, NodeKind> = HashMap::new();
    for (index, node) in graph.nodes.iter().enumerate() {
        if node.id.is_empty() {
            violations.push(Violation::EmptyNodeId { index });
            continue;
        }
        if kinds.insert(node.id.as_str(), node.kind).is_some() {
            violations.push(Violation::DuplicateNode {
                id: node.id.clone(),
            });
        }
    }

    let triggers: Vec<&NodeSpec> = graph
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Trigger)
        .collect();
    if triggers.len() != 1 {
        violations.push(Violation::TriggerCount {
            count: triggers.len(),
        });
    }

    // Only edges whose endpoints exist take part in the graph-level checks.
    let mut seen_edges = BTreeSet::new();
    let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut router_labels: BTreeMap<&str, Vec<(&str, Option<&str>)>> = BTreeMap::new();
    for edge in &graph.edges {
        let mut dangling = false;
        for end in [&edge.from, &edge.to] {
            if !kinds.contains_key(end.as_str()) {
                violations.push(Violation::UnknownEndpoint {
                    from: edge.from.clone(),
                    to: edge.to.clone(),
                    missing: end.clone(),
                });
                dangling = true;
            }
        }
        if dangling {
            continue;
        }
        if !seen_edges.insert((edge.from.as_str(), edge.to.as_str())) {
            violations.push(Violation::DuplicateEdge {
                from: edge.from.clone(),
                to: edge.to.clone(),
            });
            continue;
        }
        succ.entry(edge.from.as_str())
            .or_default()
            .push(edge.to.as_str());
        if kinds[edge.from.as_str()] == NodeKind::Router {
            router_labels
                .entry(edge.from.as_str())
                .or_default()
                .push((edge.to.as_str(), edge.branch_label.as_deref()));
        } else if edge.branch_label.is_some() {
            violations.push(Violation::LabelOnPlainEdge {
                from: edge.from.clone(),
                to: edge.to.clone(),
            });
        }
    }

    for node in graph.nodes.iter().filter(|n| n.kind == NodeKind::Router) {
        let branches = router_labels
            .get(node.id.as_str())
            .cloned()
            .unwrap_or_default();
        if branches.len() < 2 {
            violations.push(Violation::RouterFanOut {
                router: node.id.clone(),
                outgoing: branches.len(),
            });
        }
        let mut labels = BTreeSet::new();
        for (to, label) in branches {
            match label {
                None => violations.push(Violation::UnlabeledBranch {
                    router: node.id.clone(),
                    to: to.to_string(),
                }),
                Some(label) => {
                    if !labels.insert(label) {
                        violations.push(Violation::DuplicateBranchLabel {
                            router: node.id.clone(),
                            label: label.to_string(),
                        });
                    }
                }
            }
        }
    }

    let order: Vec<&str> = {
        let mut seen = BTreeSet::new();
        graph
            .nodes
            .iter()
            .map(|n| n.id.as_str())
            .filter(|id| !id.is_empty() && seen.insert(*id))
            .collect()
    };

    for cycle in find_cycles(&order, &succ) {
        violations.push(Violation::Cycle { nodes: cycle });
    }

    if let [trigger] = triggers.as_slice() {
        let reached = reachable_from(trigger.id.as_str(), &succ);
        for id in &order {
            if !reached.contains(id) {
                violations.push(Violation::Unreachable {
                    node: id.to_string(),
                });
            }
        }
    }

    let mut pred: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (from, tos) in &succ {
        for to in tos {
            pred.entry(*to).or_default().push(*from);
        }
    }
    let mut reaches_terminal: BTreeSet<&str> = BTreeSet::new();
    let mut queue: VecDeque<&str> = order
        .iter()
        .copied()
        .filter(|id| kinds[id].is_terminal())
        .collect();
    while let Some(id) = queue.pop_front() {
        if reaches_terminal.insert(id) {
            for p in pred.get(id).into_iter().flatten() {
                queue.push_back(p);
            }
        }
    }
    for id in &order {
        if !reaches_terminal.contains(id) {
            violations.push(Violation::UnreachableTerminal {
                node: id.to_string(),
            });
        }
    }

    ValidationReport {
        ok: violations.is_empty(),
        violations,
    }
}

fn reachable_from<'a>(start: &'a str, succ: &BTreeMap<&'a str, Vec<&'a str>>) -> BTreeSet<&'a str> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![start];
    while let Some(id) = stack.pop() {
        if seen.insert(id) {
            stack.extend(succ.get(id).into_iter().flatten().copied());
        }
    }
    seen
}

/// Depth-first search with an explicit path stack. Each back edge yields the
/// path segment it closes; nodes already reported are not reported again.
fn find_cycles<'a>(order: &[&'a str], succ: &BTreeMap<&'a str, Vec<&'a str>>) -> Vec<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        OnPath,
        Done,
    }
    let mut mark: HashMap<&str, Mark> = order.iter().map(|id| (*id, Mark::Fresh)).collect();
    let mut reported: BTreeSet<&str> = BTreeSet::new();
    let mut cycles = Vec::new();

    for &root in order {
        if mark[root] != Mark::Fresh {
            continue;
        }
        // (node, index of next successor to visit)
        let mut stack: Vec<(&str, usize)> = vec![(root, 0)];
        mark.insert(root, Mark::OnPath);
        while let Some((node, next)) = stack.last().copied() {
            let children = succ.get(node).map(Vec::as_slice).unwrap_or(&[]);
            if next < children.len() {
                stack.last_mut().expect("non-empty").1 += 1;
                let child = children[next];
                match mark[child] {
                    Mark::Fresh => {
                        mark.insert(child, Mark::OnPath);
                        stack.push((child, 0));
                    }
                    Mark::OnPath => {
                        let start = stack
                            .iter()
                            .position(|(n, _)| *n == child)
                            .expect("on path");
                        let members: Vec<&str> = stack[start..].iter().map(|(n, _)| *n).collect();
                        if members.iter().any(|m| !reported.contains(m)) {
                            reported.extend(members.iter().copied());
                            cycles.push(members.iter().map(|m| m.to_string()).collect());
                        }
                    }
                    Mark::Done => {}
                }
            } else {
                mark.insert(node, Mark::Done);
                stack.pop();
            }
        }
    }
    cycles
}

/// A graph that passed validation, with adjacency precomputed for scheduling.
#[derive(Debug, Clone)]
pub struct ValidatedGraph {
    graph: WorkflowGraph,
    index: HashMap<String, usize>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    labels: HashMap<(usize, usize), String>,
    ancestors: Vec<BTreeSet<usize>>,
    topo: Vec<usize>,
    trigger: usize,
}

impl ValidatedGraph {
    pub fn new(graph: WorkflowGraph) -> Result<Self, ValidationReport> {
        let report = validate_graph(&graph);
        if !report.ok {
            return Err(report);
        }
        let index: HashMap<String, usize> = graph
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        let n = graph.nodes.len();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        let mut labels = HashMap::new();
        for edge in &graph.edges {
            let (from, to) = (index[&edge.from], index[&edge.to]);
            succ[from].push(to);
            pred[to].push(from);
            if let Some(label) = &edge.branch_label {
                labels.insert((from, to), label.clone());
            }
        }

        let mut indegree: Vec<usize> = pred.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|i| indegree[*i] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(i) = queue.pop_front() {
            topo.push(i);
            for &s in &succ[i] {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    queue.push_back(s);
                }
            }
        }

        let mut ancestors = vec![BTreeSet::new(); n];
        for &i in &topo {
            let mut acc = BTreeSet::new();
            for &p in &pred[i] {
                acc.insert(p);
                acc.extend(ancestors[p].iter().copied());
            }
            ancestors[i] = acc;
        }

        let trigger = graph
            .nodes
            .iter()
            .position(|n| n.kind == NodeKind::Trigger)
            .expect("validated graph has a trigger");

        Ok(Self {
            graph,
            index,
            succ,
            pred,
            labels,
            ancestors,
            topo,
            trigger,
        })
    }

    pub fn graph(&self) -> &WorkflowGraph {
        &self.graph
    }

    pub fn len(&self) -> usize {
        self.graph.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.nodes.is_empty()
    }

    pub(crate) fn idx(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub(crate) fn spec(&self, idx: usize) -> &NodeSpec {
        &self.graph.nodes[idx]
    }

    pub fn node(&self, id: &str) -> Option<&NodeSpec> {
        self.idx(id).map(|i| self.spec(i))
    }

    pub(crate) fn successors(&self, idx: usize) -> &[usize] {
        &self.succ[idx]
    }

    pub(crate) fn predecessors_of(&self, idx: usize) -> &[usize] {
        &self.pred[idx]
    }

    pub(crate) fn ancestors_of(&self, idx: usize) -> &BTreeSet<usize> {
        &self.ancestors[idx]
    }

    pub(crate) fn label(&self, from: usize, to: usize) -> Option<&str> {
        self.labels.get(&(from, to)).map(String::as_str)
    }

    pub(crate) fn trigger_idx(&self) -> usize {
        self.trigger
    }

    pub fn trigger_id(&self) -> &str {
        &self.graph.nodes[self.trigger].id
    }

    /// Node ids in a topological order (Kahn, ties broken by declaration order).
    pub fn topological_order(&self) -> Vec<&str> {
        self.topo
            .iter()
            .map(|i| self.graph.nodes[*i].id.as_str())
            .collect()
    }

    pub fn predecessors(&self, id: &str) -> Vec<&str> {
        self.idx(id)
            .map(|i| {
                self.pred[i]
                    .iter()
                    .map(|p| self.graph.nodes[*p].id.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn branch_labels(&self, router: &str) -> Vec<&str> {
        let Some(r) = self.idx(router) else {
            return Vec::new();
        };
        self.succ[r]
            .iter()
            .filter_map(|s| self.label(r, *s))
            .collect()
    }

    /// Every node downstream of `id`, not including `id` itself.
    pub(crate) fn descendants(&self, idx: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<usize> = self.succ[idx].clone();
        while let Some(i) = stack.pop() {
            if seen.insert(i) {
                stack.extend(self.succ[i].iter().copied());
            }
        }
        seen
    }
}
