//! Exhaustive reference implementation of the exploration contract.
//!
//! `oracle_explore` enumerates every simple path from the seeds (bounded by
//! the depth limit), computes each node's best confidence by brute force, and
//! applies the threshold, ranking, and cap rules literally. It shares no code
//! with [`super::explore`] beyond the public graph accessors, so the two can
//! check each other. Intended for tests; enumeration is only feasible on
//! small graphs, hence the hard node cap.

use super::{EvidenceItem, ExplorationConfig, TraversalError};
use crate::graph::{EdgeId, KnowledgeGraph, NodeId};
use num_traits::Float;
use std::collections::{BTreeMap, BTreeSet};

const MAX_ORACLE_NODES: usize = 64;

struct BestPath<F> {
    confidence: F,
    depth: usize,
    path: Vec<EdgeId>,
}

/// Brute-force counterpart of [`super::explore`]: same inputs, same contract,
/// independent computation. Errors with a capacity message on graphs larger
/// than 64 nodes.
pub fn oracle_explore<F: Float>(
    graph: &KnowledgeGraph,
    seeds: &[NodeId],
    config: &ExplorationConfig<F>,
) -> Result<Vec<EvidenceItem<F>>, TraversalError> {
    if graph.node_count() > MAX_ORACLE_NODES {
        return Err(TraversalError::Capacity(format!(
            "oracle enumeration is limited to {MAX_ORACLE_NODES} nodes, graph has {}",
            graph.node_count()
        )));
    }
    for seed in seeds {
        if !graph.contains_node(seed) {
            return Err(TraversalError::NotFound(format!("seed node '{seed}'")));
        }
    }

    let mut best: BTreeMap<NodeId, BestPath<F>> = BTreeMap::new();
    let mut on_path: BTreeSet<NodeId> = BTreeSet::new();
    let mut seen_seeds: BTreeSet<NodeId> = BTreeSet::new();
    for seed in seeds {
        if !seen_seeds.insert(seed.clone()) {
            continue;
        }
        on_path.insert(seed.clone());
        walk(graph, seed, F::one(), &mut Vec::new(), &mut on_path, &mut best, config);
        on_path.remove(seed);
    }

    let mut items: Vec<EvidenceItem<F>> = best
        .into_iter()
        .map(|(node, b)| EvidenceItem { node, propagated_confidence: b.confidence, depth: b.depth, path: b.path })
        .collect();
    items.sort_by(|a, b| {
        b.propagated_confidence
            .partial_cmp(&a.propagated_confidence)
            .expect("confidences are never NaN")
            .then(a.depth.cmp(&b.depth))
            .then_with(|| a.node.cmp(&b.node))
    });
    items.truncate(config.max_docs);
    Ok(items)
}

fn walk<F: Float>(
    graph: &KnowledgeGraph,
    node: &NodeId,
    confidence: F,
    path: &mut Vec<EdgeId>,
    on_path: &mut BTreeSet<NodeId>,
    best: &mut BTreeMap<NodeId, BestPath<F>>,
    config: &ExplorationConfig<F>,
) {
    if confidence < config.tau {
        return;
    }
    let depth = path.len();
    let record = match best.get(node) {
        Some(b) => confidence > b.confidence || (confidence == b.confidence && depth < b.depth),
        None => true,
    };
    if record {
        best.insert(node.clone(), BestPath { confidence, depth, path: path.clone() });
    }
    if depth >= config.max_depth {
        return;
    }
    for edge_id in graph.outgoing(node) {
        let edge = graph.edge(*edge_id).expect("adjacency references stored edges");
        if on_path.contains(&edge.dst) {
            continue; // simple paths only
        }
        let child = confidence * edge.confidence_raw.normalized();
        on_path.insert(edge.dst.clone());
        path.push(*edge_id);
        walk(graph, &edge.dst, child, path, on_path, best, config);
        path.pop();
        on_path.remove(&edge.dst);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EntityNode;
    use crate::traversal::{explore, Strategy};
    use crate::RawConfidence;

    fn raw(v: u8) -> RawConfidence {
        RawConfidence::new(v).unwrap()
    }

    fn node(g: &mut KnowledgeGraph, term: &str) -> NodeId {
        g.upsert_node(EntityNode::new(term, term).unwrap()).unwrap().id
    }

    #[test]
    fn matches_explore_on_the_chain_example() {
        let mut g = KnowledgeGraph::new();
        let a = node(&mut g, "a");
        let b = node(&mut g, "b");
        let c = node(&mut g, "c");
        g.upsert_edge(&a, &b, "rel", "", raw(9)).unwrap();
        g.upsert_edge(&b, &c, "rel", "", raw(9)).unwrap();
        let config = ExplorationConfig::new(0.8, 10, Strategy::BreadthFirst, 10).unwrap();
        let fast = explore(&g, std::slice::from_ref(&a), &config).unwrap();
        let slow = oracle_explore(&g, &[a], &config).unwrap();
        assert_eq!(fast.len(), slow.len());
        for (f, s) in fast.iter().zip(&slow) {
            assert_eq!(f.node, s.node);
            assert_eq!(f.propagated_confidence, s.propagated_confidence);
            assert_eq!(f.depth, s.depth);
        }
    }

    #[test]
    fn empty_seed_list_yields_empty_result() {
        let mut g = KnowledgeGraph::new();
        node(&mut g, "a");
        let config = ExplorationConfig::new(0.5, 10, Strategy::BreadthFirst, 3).unwrap();
        assert!(oracle_explore::<f64>(&g, &[], &config).unwrap().is_empty());
    }

    #[test]
    fn isolated_seed_reports_itself_at_full_confidence() {
        let mut g = KnowledgeGraph::new();
        let a = node(&mut g, "solo");
        let config = ExplorationConfig::new(0.5, 10, Strategy::DepthFirst, 3).unwrap();
        let got = oracle_explore::<f64>(&g, std::slice::from_ref(&a), &config).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].node, a);
        assert_eq!(got[0].propagated_confidence, 1.0);
        assert_eq!(got[0].depth, 0);
    }

    #[test]
    fn oversized_graph_is_a_capacity_error() {
        let mut g = KnowledgeGraph::new();
        let first = node(&mut g, "n0");
        for i in 1..=MAX_ORACLE_NODES {
            node(&mut g, &format!("n{i}"));
        }
        let config = ExplorationConfig::new(0.5, 10, Strategy::BreadthFirst, 3).unwrap();
        let err = oracle_explore::<f64>(&g, &[first], &config).unwrap_err();
        assert!(matches!(err, TraversalError::Capacity(_)));
    }
}
