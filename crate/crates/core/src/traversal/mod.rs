//! Threshold-gated graph exploration with multiplicative confidence decay.
//!
//! Seeds start at confidence 1.0; crossing an edge multiplies by the edge's
//! normalized score, so confidence never increases along a path. A node
//! reachable over several paths is reported at its best (maximum-product)
//! confidence, with the shallowest such path breaking ties. Expansion stops
//! at the threshold `tau`, at the depth bound, and at the evidence cap, in
//! that order of application: below-`tau` branches are never entered, depth
//! is a hard safety bound, and the cap truncates the final ranked list.
//!
//! Exploration runs on a per-(node, depth) label table, so results are exact
//! for the depth-bounded best-path problem regardless of strategy; the
//! breadth-first and depth-first worklists differ only in visit order.

mod oracle;

pub use oracle::oracle_explore;

use crate::confidence::RawConfidence;
use crate::graph::{EdgeId, KnowledgeGraph, NodeId};
use num_traits::Float;
use std::collections::HashMap;
use std::collections::VecDeque;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum TraversalError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
}

/// Maps a 1-10 rubric score onto the unit interval (`raw / 10`).
pub fn normalize_confidence<F: Float>(raw: u8) -> Result<F, TraversalError> {
    let confidence = RawConfidence::new(raw)
        .map_err(|e| TraversalError::InvalidInput(e.to_string()))?;
    Ok(confidence.normalized())
}

/// Child confidence along an edge: the product of the parent's propagated
/// confidence and the edge's normalized score. Never exceeds either input.
pub fn propagate<F: Float>(parent: F, edge: F) -> F {
    parent * edge
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    BreadthFirst,
    DepthFirst,
}

impl FromStr for Strategy {
    type Err = TraversalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bfs" | "breadth-first" => Ok(Self::BreadthFirst),
            "dfs" | "depth-first" => Ok(Self::DepthFirst),
            other => Err(TraversalError::InvalidInput(format!("unknown strategy '{other}' (expected bfs|dfs)"))),
        }
    }
}

/// Exploration parameters: threshold `tau`, evidence cap, strategy, and the
/// depth safety bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationConfig<F> {
    pub tau: F,
    pub max_docs: usize,
    pub strategy: Strategy,
    pub max_depth: usize,
}

impl<F: Float> ExplorationConfig<F> {
    pub fn new(tau: F, max_docs: usize, strategy: Strategy, max_depth: usize) -> Result<Self, TraversalError> {
        if !(F::zero()..=F::one()).contains(&tau) {
            return Err(TraversalError::InvalidInput("tau must lie in [0, 1]".into()));
        }
        if max_docs == 0 {
            return Err(TraversalError::InvalidInput("max_docs must be at least 1".into()));
        }
        if max_depth == 0 {
            return Err(TraversalError::InvalidInput("max_depth must be at least 1".into()));
        }
        Ok(Self { tau, max_docs, strategy, max_depth })
    }
}

/// A node reached during exploration: its best propagated confidence, the
/// depth of the path achieving it, and that path's edge ids from the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceItem<F> {
    pub node: NodeId,
    pub propagated_confidence: F,
    pub depth: usize,
    pub path: Vec<EdgeId>,
}

#[derive(Clone)]
struct Label<F> {
    confidence: F,
    // incoming edge and parent depth; None for seeds
    parent: Option<(EdgeId, NodeId)>,
}

enum Worklist {
    Queue(VecDeque<(NodeId, usize)>),
    Stack(Vec<(NodeId, usize)>),
}

impl Worklist {
    fn new(strategy: Strategy) -> Self {
        match strategy {
            Strategy::BreadthFirst => Self::Queue(VecDeque::new()),
            Strategy::DepthFirst => Self::Stack(Vec::new()),
        }
    }

    fn push(&mut self, state: (NodeId, usize)) {
        match self {
            Self::Queue(q) => q.push_back(state),
            Self::Stack(s) => s.push(state),
        }
    }

    fn pop(&mut self) -> Option<(NodeId, usize)> {
        match self {
            Self::Queue(q) => q.pop_front(),
            Self::Stack(s) => s.pop(),
        }
    }
}

/// Explores the graph outward from `seeds` and returns the evidence set.
///
/// Guarantees:
/// - every returned item has `propagated_confidence >= tau`;
/// - per node, confidence is the maximum over all explored paths and depth is
///   the shallowest path achieving that maximum;
/// - seeds appear at confidence 1.0 and depth 0;
/// - at most `max_docs` items, ordered by descending confidence, then
///   ascending depth, then ascending node id;
/// - terminates on cyclic graphs (depth is bounded and a branch is re-entered
///   only on strict improvement).
pub fn explore<F: Float>(
    graph: &KnowledgeGraph,
    seeds: &[NodeId],
    config: &ExplorationConfig<F>,
) -> Result<Vec<EvidenceItem<F>>, TraversalError> {
    for seed in seeds {
        if !graph.contains_node(seed) {
            return Err(TraversalError::NotFound(format!("seed node '{seed}'")));
        }
    }

    // labels[(node, depth)] = best confidence reaching `node` in exactly
    // `depth` hops, plus the parent pointer achieving it.
    let mut labels: HashMap<(NodeId, usize), Label<F>> = HashMap::new();
    let mut worklist = Worklist::new(config.strategy);

    for seed in seeds {
        let state = (seed.clone(), 0usize);
        if labels.contains_key(&state) {
            continue; // duplicate seed
        }
        labels.insert(state.clone(), Label { confidence: F::one(), parent: None });
        worklist.push(state);
    }

    while let Some((node, depth)) = worklist.pop() {
        let confidence = labels[&(node.clone(), depth)].confidence;
        if depth >= config.max_depth {
            continue;
        }
        for edge_id in graph.outgoing(&node) {
            let edge = graph.edge(*edge_id).expect("adjacency references stored edges");
            let child_confidence = propagate(confidence, edge.confidence_raw.normalized());
            if child_confidence < config.tau {
                continue; // below-threshold branches are never entered
            }
            let state = (edge.dst.clone(), depth + 1);
            let improved = match labels.get(&state) {
                Some(existing) => child_confidence > existing.confidence,
                None => true,
            };
            if improved {
                labels.insert(state.clone(), Label {
                    confidence: child_confidence,
                    parent: Some((*edge_id, node.clone())),
                });
                worklist.push(state);
            }
        }
    }

    // Per node: maximum confidence over depths, shallowest depth on ties.
    let mut best: HashMap<NodeId, (F, usize)> = HashMap::new();
    for ((node, depth), label) in &labels {
        match best.get(node) {
            Some(&(conf, d)) if label.confidence < conf || (label.confidence == conf && *depth >= d) => {}
            _ => {
                best.insert(node.clone(), (label.confidence, *depth));
            }
        }
    }

    let mut items: Vec<EvidenceItem<F>> = best
        .into_iter()
        .map(|(node, (confidence, depth))| {
            let path = reconstruct_path(&labels, &node, depth);
            EvidenceItem { node, propagated_confidence: confidence, depth, path }
        })
        .collect();
    items.sort_by(|a, b| {
        b.propagated_confidence
            .partial_cmp(&a.propagated_confidence)
            .expect("propagated confidences are never NaN")
            .then(a.depth.cmp(&b.depth))
            .then_with(|| a.node.cmp(&b.node))
    });
    items.truncate(config.max_docs);
    Ok(items)
}

fn reconstruct_path<F: Float>(
    labels: &HashMap<(NodeId, usize), Label<F>>,
    node: &NodeId,
    depth: usize,
) -> Vec<EdgeId> {
    let mut path = Vec::with_capacity(depth);
    let mut cursor = (node.clone(), depth);
    while let Some((edge, parent)) = labels[&cursor].parent.clone() {
        path.push(edge);
        cursor = (parent, cursor.1 - 1);
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EntityNode;

    fn raw(v: u8) -> RawConfidence {
        RawConfidence::new(v).unwrap()
    }

    fn node(g: &mut KnowledgeGraph, term: &str) -> NodeId {
        g.upsert_node(EntityNode::new(term, term).unwrap()).unwrap().id
    }

    fn config(tau: f64, max_docs: usize, strategy: Strategy, max_depth: usize) -> ExplorationConfig<f64> {
        ExplorationConfig::new(tau, max_docs, strategy, max_depth).unwrap()
    }

    #[test]
    fn normalize_maps_rubric_to_unit_interval() {
        assert_eq!(normalize_confidence::<f64>(10).unwrap(), 1.0);
        assert_eq!(normalize_confidence::<f64>(8).unwrap(), 0.8);
        assert!(matches!(normalize_confidence::<f64>(0), Err(TraversalError::InvalidInput(_))));
        assert!(matches!(normalize_confidence::<f64>(11), Err(TraversalError::InvalidInput(_))));
    }

    #[test]
    fn propagate_is_the_product() {
        assert_eq!(propagate(1.0, 0.8), 0.8);
        assert_eq!(propagate(0.7, 1.0), 0.7);
        assert_eq!(propagate(0.9, 0.9), 0.81);
        // generic over the scalar
        assert_eq!(propagate(0.5f32, 0.5f32), 0.25f32);
    }

    #[test]
    fn chain_includes_grandchild_at_exact_threshold() {
        let mut g = KnowledgeGraph::new();
        let a = node(&mut g, "a");
        let b = node(&mut g, "b");
        let c = node(&mut g, "c");
        g.upsert_edge(&a, &b, "rel", "", raw(9)).unwrap();
        g.upsert_edge(&b, &c, "rel", "", raw(9)).unwrap();
        let got = explore(&g, std::slice::from_ref(&a), &config(0.8, 10, Strategy::BreadthFirst, 10)).unwrap();
        let summary: Vec<(&str, f64, usize)> =
            got.iter().map(|e| (e.node.as_str(), e.propagated_confidence, e.depth)).collect();
        assert_eq!(summary, vec![("a", 1.0, 0), ("b", 0.9, 1), ("c", 0.81, 2)]);
    }

    #[test]
    fn diamond_reports_best_path_product() {
        let mut g = KnowledgeGraph::new();
        let a = node(&mut g, "a");
        let b = node(&mut g, "b");
        let c = node(&mut g, "c");
        let d = node(&mut g, "d");
        g.upsert_edge(&a, &b, "rel", "", raw(5)).unwrap();
        g.upsert_edge(&b, &d, "rel", "", raw(10)).unwrap();
        g.upsert_edge(&a, &c, "rel", "", raw(9)).unwrap();
        g.upsert_edge(&c, &d, "rel", "", raw(9)).unwrap();
        for strategy in [Strategy::BreadthFirst, Strategy::DepthFirst] {
            let got = explore(&g, std::slice::from_ref(&a), &config(0.4, 10, strategy, 10)).unwrap();
            let d_item = got.iter().find(|e| e.node == d).unwrap();
            assert_eq!(d_item.propagated_confidence, 0.81);
            assert_eq!(d_item.depth, 2);
        }
    }

    #[test]
    fn zero_tau_visits_every_reachable_node_once() {
        let mut g = KnowledgeGraph::new();
        let ids: Vec<NodeId> = (0..5).map(|i| node(&mut g, &format!("n{i}"))).collect();
        for w in ids.windows(2) {
            g.upsert_edge(&w[0], &w[1], "rel", "", raw(3)).unwrap();
        }
        let got = explore(&g, &[ids[0].clone()], &config(0.0, usize::MAX, Strategy::BreadthFirst, 16)).unwrap();
        assert_eq!(got.len(), 5);
        let mut seen: Vec<&str> = got.iter().map(|e| e.node.as_str()).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 5);
    }

    #[test]
    fn seeds_return_at_full_confidence_depth_zero() {
        let mut g = KnowledgeGraph::new();
        let a = node(&mut g, "a");
        let got = explore(&g, &[a.clone(), a.clone()], &config(0.9, 10, Strategy::DepthFirst, 3)).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].propagated_confidence, 1.0);
        assert_eq!(got[0].depth, 0);
        assert!(got[0].path.is_empty());
    }

    #[test]
    fn unknown_seed_is_not_found() {
        let g = KnowledgeGraph::new();
        let ghost = NodeId::from_term("ghost").unwrap();
        let err = explore(&g, &[ghost], &config(0.5, 10, Strategy::BreadthFirst, 3)).unwrap_err();
        assert!(matches!(err, TraversalError::NotFound(_)));
    }

    #[test]
    fn terminates_on_cycles_and_respects_cap() {
        let mut g = KnowledgeGraph::new();
        let a = node(&mut g, "a");
        let b = node(&mut g, "b");
        // upsert_edge already materializes the reverse, so a<->b is a 2-cycle
        g.upsert_edge(&a, &b, "rel", "", raw(10)).unwrap();
        let got = explore(&g, std::slice::from_ref(&a), &config(0.0, 1, Strategy::DepthFirst, 50)).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].node, a);
    }

    #[test]
    fn confidences_never_increase_along_returned_paths() {
        let mut g = KnowledgeGraph::new();
        let ids: Vec<NodeId> = (0..6).map(|i| node(&mut g, &format!("n{i}"))).collect();
        for (i, j, c) in [(0, 1, 9), (1, 2, 10), (0, 2, 7), (2, 3, 8), (3, 4, 9), (1, 4, 6), (4, 5, 10)] {
            g.upsert_edge(&ids[i], &ids[j], "rel", "", raw(c)).unwrap();
        }
        let got = explore(&g, &[ids[0].clone()], &config(0.1, 64, Strategy::BreadthFirst, 8)).unwrap();
        for item in &got {
            let mut running = 1.0f64;
            for edge_id in &item.path {
                let edge = g.edge(*edge_id).unwrap();
                let next = propagate(running, edge.confidence_raw.normalized());
                assert!(next <= running);
                running = next;
            }
            assert_eq!(running, item.propagated_confidence);
            assert_eq!(item.path.len(), item.depth);
        }
    }

    #[test]
    fn depth_bound_limits_expansion() {
        let mut g = KnowledgeGraph::new();
        let ids: Vec<NodeId> = (0..4).map(|i| node(&mut g, &format!("n{i}"))).collect();
        for w in ids.windows(2) {
            g.upsert_edge(&w[0], &w[1], "rel", "", raw(10)).unwrap();
        }
        let got = explore(&g, &[ids[0].clone()], &config(0.0, 100, Strategy::BreadthFirst, 2)).unwrap();
        assert_eq!(got.len(), 3); // seed + two hops
    }

    #[test]
    fn config_validation() {
        assert!(ExplorationConfig::new(1.1, 1, Strategy::BreadthFirst, 1).is_err());
        assert!(ExplorationConfig::new(-0.1, 1, Strategy::BreadthFirst, 1).is_err());
        assert!(ExplorationConfig::new(0.5, 0, Strategy::BreadthFirst, 1).is_err());
        assert!(ExplorationConfig::new(0.5, 1, Strategy::BreadthFirst, 0).is_err());
        assert!(ExplorationConfig::new(0.5, 1, Strategy::BreadthFirst, 1).is_ok());
    }

    #[test]
    fn strategy_parses_from_cli_forms() {
        assert_eq!("bfs".parse::<Strategy>().unwrap(), Strategy::BreadthFirst);
        assert_eq!("depth-first".parse::<Strategy>().unwrap(), Strategy::DepthFirst);
        assert!("best-first".parse::<Strategy>().is_err());
    }
}
