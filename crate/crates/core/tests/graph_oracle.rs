mod support;

use diligence_core::engine::{validate_graph, EdgeSpec, NodeKind, NodeSpec, WorkflowGraph};
use diligence_core::pipeline::bundled_graph;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use support::{mutate, oracle_accepts};

#[test]
fn bundled_graph_is_accepted_by_both() {
    let graph = bundled_graph();
    assert!(validate_graph(&graph).ok, "{}", validate_graph(&graph));
    assert!(oracle_accepts(&graph));
}

#[test]
fn mutated_graphs_agree_with_oracle() {
    let base = bundled_graph();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let (mut accepted, mut rejected) = (0, 0);
    for i in 0..400 {
        let (graph, mutation) = mutate(&base, &mut rng);
        let expected = oracle_accepts(&graph);
        let report = validate_graph(&graph);
        assert_eq!(
            report.ok, expected,
            "mutation {i} ({mutation:?}): validator said {report}"
        );
        if expected {
            accepted += 1;
        } else {
            rejected += 1;
        }
    }
    assert!(
        accepted > 20 && rejected > 20,
        "{accepted} accepted, {rejected} rejected"
    );
}

#[test]
fn reversing_a_router_branch_is_rejected() {
    let base = bundled_graph();
    let i = base
        .edges
        .iter()
        .position(|e| e.branch_label.is_some())
        .unwrap();
    let mut graph = base.clone();
    let e = &mut graph.edges[i];
    std::mem::swap(&mut e.from, &mut e.to);
    assert!(!oracle_accepts(&graph));
    assert!(!validate_graph(&graph).ok);
}

fn arb_graph() -> impl Strategy<Value = WorkflowGraph> {
    (
        2usize..8,
        prop::collection::vec((0usize..8, 0usize..8), 0..16),
        any::<bool>(),
    )
        .prop_map(|(n, pairs, with_router)| {
            let mut nodes = vec![NodeSpec::new("n0", NodeKind::Trigger, "h")];
            for i in 1..n - 1 {
                let kind = if with_router && i == 1 {
                    NodeKind::Router
                } else {
                    NodeKind::Transform
                };
                nodes.push(NodeSpec::new(format!("n{i}"), kind, "h"));
            }
            nodes.push(NodeSpec::new(format!("n{}", n - 1), NodeKind::Render, "h"));
            let mut edges = Vec::new();
            for (k, (a, b)) in pairs.into_iter().enumerate() {
                let (a, b) = (a % n, b % n);
                let from = &nodes[a];
                edges.push(if from.kind == NodeKind::Router {
                    EdgeSpec::branch(&from.id, format!("n{b}"), format!("l{k}"))
                } else {
                    EdgeSpec::new(&from.id, format!("n{b}"))
                });
            }
            WorkflowGraph { nodes, edges }
        })
}

proptest! {
    #[test]
    fn random_graphs_agree_with_oracle(graph in arb_graph()) {
        prop_assert_eq!(validate_graph(&graph).ok, oracle_accepts(&graph));
    }
}
