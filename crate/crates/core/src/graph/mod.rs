//! In-process property graph of entities and confidence-scored relations.
//!
//! Nodes are identified by their canonicalized term (case-folded, whitespace
//! collapsed) so repeated builds merge instead of duplicating entities. Every
//! relation is stored in both directions: `upsert_edge` materializes a
//! forward/reverse pair cross-linked through `reverse_of`, which keeps
//! traversal symmetric without on-the-fly edge reversal. Duplicate relations
//! collapse on the `(src, dst, label)` key and keep the strongest attested
//! confidence.
//!
//! Mutation is single-writer; concurrent readers work on immutable snapshots
//! published through [`GraphStore`].

mod export;
mod store;

pub use export::{export_graph, export_graph_to_path, import_graph, import_graph_from_path, ExportFormat};
pub use store::GraphStore;

use crate::canon::canonical_term;
use crate::confidence::RawConfidence;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("validation failed [{rule}]: {detail}")]
    Validation { rule: &'static str, detail: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Stable node identifier: the canonicalized term.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    /// Derives the identifier for a term. Rejects terms that canonicalize to
    /// the empty string.
    pub fn from_term(term: &str) -> Result<Self, GraphError> {
        let canon = canonical_term(term);
        if canon.is_empty() {
            return Err(GraphError::InvalidInput("term must be non-empty".into()));
        }
        Ok(Self(canon))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u64);

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Where a node's description came from: which source, for which query, when.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub query: String,
    pub retrieved_at: DateTime<Utc>,
}

/// A graph entity: canonical id, display term, retrieved description, and an
/// optional summary with its reliability score.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityNode {
    pub id: NodeId,
    pub term: String,
    pub description: String,
    pub summary: Option<String>,
    pub summary_confidence: Option<RawConfidence>,
    pub sources: Vec<Provenance>,
}

impl EntityNode {
    pub fn new(term: &str, description: &str) -> Result<Self, GraphError> {
        let id = NodeId::from_term(term)?;
        Ok(Self {
            id,
            term: term.trim().to_string(),
            description: description.to_string(),
            summary: None,
            summary_confidence: None,
            sources: Vec::new(),
        })
    }

    pub fn with_summary(mut self, summary: &str, confidence: RawConfidence) -> Self {
        self.summary = Some(summary.to_string());
        self.summary_confidence = Some(confidence);
        self
    }

    pub fn with_source(mut self, provenance: Provenance) -> Self {
        self.sources.push(provenance);
        self
    }

    fn validate(&self) -> Result<(), GraphError> {
        let expected = NodeId::from_term(&self.term)?;
        if expected != self.id {
            return Err(GraphError::Validation {
                rule: "node-id-canonical",
                detail: format!("id {:?} does not match canonical form of term {:?}", self.id.0, self.term),
            });
        }
        match (&self.summary, &self.summary_confidence) {
            (Some(_), Some(_)) | (None, None) => Ok(()),
            _ => Err(GraphError::Validation {
                rule: "summary-confidence-pairing",
                detail: format!("node {} has a summary without a score or vice versa", self.id),
            }),
        }
    }
}

/// A directed, typed, confidence-scored relation. Stored edges always come in
/// forward/reverse pairs linked through `reverse_of`.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub id: EdgeId,
    pub src: NodeId,
    pub dst: NodeId,
    pub label: String,
    pub annotation: String,
    pub confidence_raw: RawConfidence,
    pub reverse_of: Option<EdgeId>,
    pub created_at: DateTime<Utc>,
}

/// Build parameters recorded with a graph.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<RawConfidence>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub built_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpsertOutcome {
    Created,
    Updated,
    Unchanged,
}

/// Result of a node upsert: the canonical id plus what happened.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeUpsert {
    pub id: NodeId,
    pub outcome: UpsertOutcome,
}

/// Result of an edge upsert: both directions of the stored pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeUpsert {
    pub forward: EdgeId,
    pub reverse: EdgeId,
    pub outcome: UpsertOutcome,
}

type EdgeKey = (NodeId, NodeId, String);

/// The property graph. Maps are ordered so iteration, export, and traversal
/// are deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeGraph {
    nodes: BTreeMap<NodeId, EntityNode>,
    edges: BTreeMap<EdgeId, Relation>,
    adjacency: BTreeMap<NodeId, Vec<EdgeId>>,
    edge_keys: BTreeMap<EdgeKey, EdgeId>,
    next_edge: u64,
    pub metadata: GraphMetadata,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self { next_edge: 1, ..Self::default() }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_node(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn node(&self, id: &NodeId) -> Option<&EntityNode> {
        self.nodes.get(id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Relation> {
        self.edges.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &EntityNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Relation> {
        self.edges.values()
    }

    /// Outgoing edge ids for a node, in creation order.
    pub fn outgoing(&self, id: &NodeId) -> &[EdgeId] {
        self.adjacency.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Inserts or merges a node under its canonical id.
    ///
    /// Merging appends the incoming provenance records, replaces the
    /// description when the incoming one is non-empty and different, and keeps
    /// the summary with the higher reliability score. Provenance growth alone
    /// does not count as an update.
    pub fn upsert_node(&mut self, node: EntityNode) -> Result<NodeUpsert, GraphError> {
        node.validate()?;
        let id = node.id.clone();
        match self.nodes.entry(id.clone()) {
            Entry::Vacant(slot) => {
                slot.insert(node);
                self.adjacency.entry(id.clone()).or_default();
                Ok(NodeUpsert { id, outcome: UpsertOutcome::Created })
            }
            Entry::Occupied(mut slot) => {
                let current = slot.get_mut();
                let mut changed = false;
                if !node.description.is_empty() && node.description != current.description {
                    current.description = node.description;
                    changed = true;
                }
                let incoming_beats_current = match (node.summary_confidence, current.summary_confidence) {
                    (Some(new), Some(old)) => new > old,
                    (Some(_), None) => true,
                    (None, _) => false,
                };
                if incoming_beats_current {
                    current.summary = node.summary;
                    current.summary_confidence = node.summary_confidence;
                    changed = true;
                }
                current.sources.extend(node.sources);
                let outcome = if changed { UpsertOutcome::Updated } else { UpsertOutcome::Unchanged };
                Ok(NodeUpsert { id, outcome })
            }
        }
    }

    /// Stores a relation bidirectionally: a forward edge plus its materialized
    /// reverse, cross-linked through `reverse_of`. A duplicate `(src, dst,
    /// label)` keeps the maximum confidence; the annotation follows the
    /// stronger judgment.
    pub fn upsert_edge(
        &mut self,
        src: &NodeId,
        dst: &NodeId,
        label: &str,
        annotation: &str,
        confidence: RawConfidence,
    ) -> Result<EdgeUpsert, GraphError> {
        if !self.nodes.contains_key(src) {
            return Err(GraphError::NotFound(format!("node '{src}'")));
        }
        if !self.nodes.contains_key(dst) {
            return Err(GraphError::NotFound(format!("node '{dst}'")));
        }
        if src == dst {
            return Err(GraphError::InvalidInput(format!("self-loop on '{src}' rejected")));
        }
        if label.trim().is_empty() {
            return Err(GraphError::InvalidInput("relation label must be non-empty".into()));
        }

        let key: EdgeKey = (src.clone(), dst.clone(), label.to_string());
        if let Some(&forward) = self.edge_keys.get(&key) {
            let reverse = self.edges[&forward].reverse_of.expect("stored edges are paired");
            let existing = self.edges[&forward].confidence_raw;
            let outcome = if confidence > existing {
                for edge_id in [forward, reverse] {
                    let edge = self.edges.get_mut(&edge_id).expect("edge id is indexed");
                    edge.confidence_raw = confidence;
                    edge.annotation = annotation.to_string();
                }
                UpsertOutcome::Updated
            } else {
                UpsertOutcome::Unchanged
            };
            return Ok(EdgeUpsert { forward, reverse, outcome });
        }

        let forward = EdgeId(self.next_edge);
        let reverse = EdgeId(self.next_edge + 1);
        self.next_edge += 2;
        let created_at = Utc::now();
        self.edges.insert(
            forward,
            Relation {
                id: forward,
                src: src.clone(),
                dst: dst.clone(),
                label: label.to_string(),
                annotation: annotation.to_string(),
                confidence_raw: confidence,
                reverse_of: Some(reverse),
                created_at,
            },
        );
        self.edges.insert(
            reverse,
            Relation {
                id: reverse,
                src: dst.clone(),
                dst: src.clone(),
                label: label.to_string(),
                annotation: annotation.to_string(),
                confidence_raw: confidence,
                reverse_of: Some(forward),
                created_at,
            },
        );
        self.adjacency.entry(src.clone()).or_default().push(forward);
        self.adjacency.entry(dst.clone()).or_default().push(reverse);
        self.edge_keys.insert(key, forward);
        self.edge_keys.insert((dst.clone(), src.clone(), label.to_string()), reverse);
        Ok(EdgeUpsert { forward, reverse, outcome: UpsertOutcome::Created })
    }

    /// Outgoing relations of a node at or above a confidence floor, each
    /// paired with its target node. Ordered by descending confidence, then
    /// ascending target id.
    pub fn neighbors(
        &self,
        id: &NodeId,
        min_confidence: RawConfidence,
    ) -> Result<Vec<(&Relation, &EntityNode)>, GraphError> {
        if !self.nodes.contains_key(id) {
            return Err(GraphError::NotFound(format!("node '{id}'")));
        }
        let mut hits: Vec<&Relation> = self
            .outgoing(id)
            .iter()
            .map(|edge_id| &self.edges[edge_id])
            .filter(|edge| edge.confidence_raw >= min_confidence)
            .collect();
        hits.sort_by(|a, b| b.confidence_raw.cmp(&a.confidence_raw).then_with(|| a.dst.cmp(&b.dst)));
        Ok(hits
            .into_iter()
            .map(|edge| (edge, &self.nodes[&edge.dst]))
            .collect())
    }

    /// Checks every structural invariant; import runs this before accepting a
    /// document.
    pub fn validate(&self) -> Result<(), GraphError> {
        for node in self.nodes.values() {
            node.validate()?;
        }
        for edge in self.edges.values() {
            if !self.nodes.contains_key(&edge.src) || !self.nodes.contains_key(&edge.dst) {
                return Err(GraphError::Validation {
                    rule: "edge-endpoint-exists",
                    detail: format!("edge {} references a missing endpoint", edge.id),
                });
            }
            if edge.src == edge.dst {
                return Err(GraphError::Validation {
                    rule: "no-self-loop",
                    detail: format!("edge {} loops on '{}'", edge.id, edge.src),
                });
            }
            let reverse_id = edge.reverse_of.ok_or(GraphError::Validation {
                rule: "bidirectional-pair",
                detail: format!("edge {} has no reverse counterpart", edge.id),
            })?;
            let reverse = self.edges.get(&reverse_id).ok_or(GraphError::Validation {
                rule: "bidirectional-pair",
                detail: format!("edge {} references missing reverse {}", edge.id, reverse_id),
            })?;
            if reverse.reverse_of != Some(edge.id) || reverse.src != edge.dst || reverse.dst != edge.src {
                return Err(GraphError::Validation {
                    rule: "bidirectional-pair",
                    detail: format!("edges {} and {} are not a forward/reverse pair", edge.id, reverse_id),
                });
            }
        }
        for (node, out) in &self.adjacency {
            for edge_id in out {
                let edge = self.edges.get(edge_id).ok_or(GraphError::Validation {
                    rule: "adjacency-consistent",
                    detail: format!("adjacency of '{node}' references missing edge {edge_id}"),
                })?;
                if &edge.src != node {
                    return Err(GraphError::Validation {
                        rule: "adjacency-consistent",
                        detail: format!("edge {} listed under '{}' but starts at '{}'", edge_id, node, edge.src),
                    });
                }
            }
        }
        Ok(())
    }
}
