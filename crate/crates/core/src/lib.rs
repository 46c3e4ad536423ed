//! Confidence-scored knowledge graphs for retrieval-augmented question answering.
//!
//! The crate builds property graphs whose entities are backed by search-tool
//! descriptions and whose relations carry an integer reliability score on a
//! 1-10 rubric. A multiplicative confidence-propagation traversal turns those
//! graphs into ranked evidence sets, per-entity reasoning traces, and finally
//! synthesized multiple-choice answers. Plain retrieval, retrieval+reasoning,
//! and retrieval+search baselines share the same agent contracts so the whole
//! pipeline runs offline against scripted mocks and fixture sources.
//!
//! Module map:
//!
//! - [`graph`] — the in-process property graph: entity nodes, bidirectional
//!   confidence-scored relations, snapshot store, portable/Cypher export.
//! - [`traversal`] — confidence algebra and threshold-gated graph exploration.
//! - [`agents`] — contracts for every model-backed step plus a deterministic
//!   scripted mock and an HTTP chat-completion provider.
//! - [`search`] — description retrieval from fixture/PubMed-style/wiki-style
//!   sources with caching and rate limiting.
//! - [`ingest`] — corpus chunking, embedding, vector indexing, top-k search.
//! - [`builder`] — orchestration that grows the graph from queries.
//! - [`qa`] — the graph-guided QA pipeline, baselines, and evaluation harness.
//!
//! Numeric kernels (confidence propagation, embeddings, cosine ranking) are
//! generic over [`num_traits::Float`]; the aliases below pin the `f64`
//! instantiations used by the CLI and the default pipeline.
//!
//! ```
//! use medkg::traversal::{explore, ExplorationConfig, Strategy};
//! use medkg::{EntityNode, ExploreConfig, KnowledgeGraph, RawConfidence};
//!
//! let mut graph = KnowledgeGraph::new();
//! let levodopa = graph
//!     .upsert_node(EntityNode::new("Levodopa", "dopamine precursor")?)?
//!     .id;
//! let parkinsons = graph
//!     .upsert_node(EntityNode::new("Parkinson's disease", "movement disorder")?)?
//!     .id;
//! // stored bidirectionally: a forward edge plus its linked reverse
//! graph.upsert_edge(&levodopa, &parkinsons, "primary treatment", "first-line therapy", RawConfidence::new(9)?)?;
//!
//! let config: ExploreConfig = ExplorationConfig::new(0.8, 10, Strategy::BreadthFirst, 4)?;
//! let evidence = explore(&graph, &[levodopa], &config)?;
//! assert_eq!(evidence.len(), 2); // the seed at 1.0 plus its neighbor at 0.9
//! assert_eq!(evidence[1].propagated_confidence, 0.9);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod agents;
pub mod builder;
pub mod canon;
pub mod confidence;
pub mod graph;
pub mod ingest;
pub mod qa;
pub mod search;
pub mod traversal;

#[cfg(test)]
pub(crate) mod testhttp;

/// Default scalar for propagated confidences and similarity scores.
pub type Score = f64;

/// [`traversal::EvidenceItem`] at the default scalar.
pub type Evidence = traversal::EvidenceItem<Score>;

/// [`traversal::ExplorationConfig`] at the default scalar.
pub type ExploreConfig = traversal::ExplorationConfig<Score>;

/// [`ingest::VectorIndex`] at the default scalar.
pub type Index = ingest::VectorIndex<Score>;

pub use confidence::RawConfidence;
pub use graph::{EdgeId, EntityNode, KnowledgeGraph, NodeId, Relation};
