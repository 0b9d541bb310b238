//! Readiness, routing and failure propagation over a [`RunContext`].
//!
//! Joins use any-of semantics: a node runs once every predecessor has
//! settled and at least one of them carries live data. A predecessor is live
//! when it succeeded, or when it failed (or was skipped) under degrade policy
//! and so stands for an absorbed gap rather than a dead branch.

use std::collections::{BTreeSet, VecDeque};

use super::context::{NodeState, RunContext, SkipCause};
use super::graph::{FailurePolicy, ValidatedGraph};
use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Settled {
    Open,
    Live,
    Dead,
    Blocking,
}

fn settle(graph: &ValidatedGraph, ctx: &RunContext, idx: usize) -> Settled {
    let spec = graph.spec(idx);
    let status = ctx.status(&spec.id).expect("status per node");
    match status.state {
        NodeState::Pending | NodeState::Ready | NodeState::Running => Settled::Open,
        NodeState::Succeeded => Settled::Live,
        NodeState::Failed => match spec.policy {
            FailurePolicy::Degrade => Settled::Live,
            FailurePolicy::Strict => Settled::Blocking,
        },
        NodeState::Skipped => match status.skip_cause {
            Some(SkipCause::Degraded { .. }) => Settled::Live,
            _ => Settled::Dead,
        },
    }
}

fn is_degraded(graph: &ValidatedGraph, ctx: &RunContext, idx: usize) -> bool {
    let spec = graph.spec(idx);
    let status = ctx.status(&spec.id).expect("status per node");
    match status.state {
        NodeState::Failed => spec.policy == FailurePolicy::Degrade,
        NodeState::Skipped => matches!(status.skip_cause, Some(SkipCause::Degraded { .. })),
        _ => false,
    }
}

/// Pending nodes whose inputs have all settled with at least one live input.
/// The trigger is ready once a trigger payload has been supplied.
pub fn ready_set(graph: &ValidatedGraph, ctx: &RunContext) -> BTreeSet<String> {
    let mut ready = BTreeSet::new();
    for idx in 0..graph.len() {
        let spec = graph.spec(idx);
        if ctx.state(&spec.id) != Some(NodeState::Pending) {
            continue;
        }
        if idx == graph.trigger_idx() {
            if ctx.trigger_payload().is_some() {
                ready.insert(spec.id.clone());
            }
            continue;
        }
        let preds = graph.predecessors_of(idx);
        let mut any_live = false;
        let mut blocked = false;
        for &p in preds {
            match settle(graph, ctx, p) {
                Settled::Open | Settled::Blocking => {
                    blocked = true;
                    break;
                }
                Settled::Live => any_live = true,
                Settled::Dead => {}
            }
        }
        if blocked || !any_live {
            continue;
        }
        // Degrade-policy nodes downstream of a degraded gap are skipped, not run.
        if spec.policy == FailurePolicy::Degrade
            && preds.iter().any(|p| is_degraded(graph, ctx, *p))
        {
            continue;
        }
        ready.insert(spec.id.clone());
    }
    ready
}

/// Records the router's decision and skips every pending node that is now
/// only reachable through untaken branches.
pub fn apply_route(
    router_id: &str,
    taken_label: &str,
    graph: &ValidatedGraph,
    ctx: &mut RunContext,
) -> Result<Vec<String>, EngineError> {
    let labels = graph.branch_labels(router_id);
    if labels.is_empty() {
        return Err(EngineError::UnknownNode(router_id.to_string()));
    }
    if !labels.contains(&taken_label) {
        return Err(EngineError::Routing {
            router: router_id.to_string(),
            label: taken_label.to_string(),
        });
    }
    ctx.record_route(router_id, taken_label);

    let live = live_nodes(graph, ctx);
    let mut skipped = Vec::new();
    for idx in 0..graph.len() {
        let id = &graph.spec(idx).id;
        if !live.contains(&idx) && ctx.state(id) == Some(NodeState::Pending) {
            ctx.mark_skipped(
                id,
                SkipCause::Route {
                    router: router_id.to_string(),
                    label: taken_label.to_string(),
                },
            )?;
            skipped.push(id.clone());
        }
    }
    Ok(skipped)
}

/// Nodes reachable from the trigger without crossing an untaken branch or a
/// node that is dead (route-skipped, or failed/skipped under strict policy).
fn live_nodes(graph: &ValidatedGraph, ctx: &RunContext) -> BTreeSet<usize> {
    let routes = ctx.routes();
    let mut live = BTreeSet::new();
    let mut queue = VecDeque::from([graph.trigger_idx()]);
    while let Some(idx) = queue.pop_front() {
        if !live.insert(idx) {
            continue;
        }
        if matches!(settle(graph, ctx, idx), Settled::Dead | Settled::Blocking) {
            continue;
        }
        let taken = routes.get(&graph.spec(idx).id);
        for &next in graph.successors(idx) {
            let passes = match (taken, graph.label(idx, next)) {
                (Some(taken), Some(label)) => taken == label,
                _ => true,
            };
            if passes {
                queue.push_back(next);
            }
        }
    }
    live
}

/// Applies a node failure to its descendants according to the node's policy.
/// Returns the ids that were skipped.
pub(crate) fn propagate_failure(
    graph: &ValidatedGraph,
    ctx: &mut RunContext,
    failed_id: &str,
) -> Result<Vec<String>, EngineError> {
    let idx = graph
        .idx(failed_id)
        .ok_or_else(|| EngineError::UnknownNode(failed_id.to_string()))?;
    let mut skipped = Vec::new();
    match graph.spec(idx).policy {
        FailurePolicy::Strict => {
            for d in graph.descendants(idx) {
                let id = graph.spec(d).id.clone();
                if ctx.state(&id) == Some(NodeState::Pending) {
                    ctx.mark_skipped(
                        &id,
                        SkipCause::UpstreamFailure {
                            origin: failed_id.to_string(),
                        },
                    )?;
                    skipped.push(id);
                }
            }
        }
        FailurePolicy::Degrade => {
            let mut stack: Vec<usize> = graph.successors(idx).to_vec();
            let mut seen = BTreeSet::new();
            while let Some(d) = stack.pop() {
                if !seen.insert(d) {
                    continue;
                }
                let spec = graph.spec(d);
                if spec.policy != FailurePolicy::Degrade
                    || ctx.state(&spec.id) != Some(NodeState::Pending)
                {
                    continue;
                }
                let id = spec.id.clone();
                ctx.mark_skipped(
                    &id,
                    SkipCause::Degraded {
                        origin: failed_id.to_string(),
                    },
                )?;
                skipped.push(id);
                stack.extend(graph.successors(d).iter().copied());
            }
        }
    }
    Ok(skipped)
}
