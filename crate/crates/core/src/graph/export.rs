//! Portable and Cypher serialization of a knowledge graph.
//!
//! The portable format is a single JSON document with `nodes` and `edges`
//! arrays (field names match the domain types, confidences as integers) and
//! round-trips losslessly. The Cypher form emits one `CREATE` statement per
//! node and one per stored directed edge, with `label`, `annotation`, and
//! `confidence` as relationship properties, so the graph can be loaded into a
//! property-graph database without a live driver.

use super::{EdgeId, EntityNode, GraphError, GraphMetadata, KnowledgeGraph, NodeId, Provenance, Relation};
use crate::confidence::RawConfidence;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Portable,
    Cypher,
}

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Document {
    format_version: u32,
    #[serde(default)]
    metadata: GraphMetadata,
    nodes: Vec<NodeDoc>,
    edges: Vec<EdgeDoc>,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: String,
    term: String,
    description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    summary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    summary_confidence: Option<u8>,
    #[serde(default)]
    sources: Vec<Provenance>,
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    id: u64,
    src: String,
    dst: String,
    label: String,
    annotation: String,
    confidence_raw: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reverse_of: Option<u64>,
    created_at: DateTime<Utc>,
}

impl From<&EntityNode> for NodeDoc {
    fn from(node: &EntityNode) -> Self {
        Self {
            id: node.id.as_str().to_string(),
            term: node.term.clone(),
            description: node.description.clone(),
            summary: node.summary.clone(),
            summary_confidence: node.summary_confidence.map(RawConfidence::get),
            sources: node.sources.clone(),
        }
    }
}

impl From<&Relation> for EdgeDoc {
    fn from(edge: &Relation) -> Self {
        Self {
            id: edge.id.0,
            src: edge.src.as_str().to_string(),
            dst: edge.dst.as_str().to_string(),
            label: edge.label.clone(),
            annotation: edge.annotation.clone(),
            confidence_raw: edge.confidence_raw.get(),
            reverse_of: edge.reverse_of.map(|e| e.0),
            created_at: edge.created_at,
        }
    }
}

/// Serializes a graph to the requested format.
pub fn export_graph(graph: &KnowledgeGraph, format: ExportFormat) -> Result<Vec<u8>, GraphError> {
    match format {
        ExportFormat::Portable => {
            let doc = Document {
                format_version: FORMAT_VERSION,
                metadata: graph.metadata.clone(),
                nodes: graph.nodes().map(NodeDoc::from).collect(),
                edges: graph.edges().map(EdgeDoc::from).collect(),
            };
            serde_json::to_vec_pretty(&doc)
                .map_err(|e| GraphError::Validation { rule: "serialize", detail: e.to_string() })
        }
        ExportFormat::Cypher => Ok(cypher_script(graph).into_bytes()),
    }
}

/// Writes an export to disk, attaching the path to any I/O failure.
pub fn export_graph_to_path(graph: &KnowledgeGraph, format: ExportFormat, path: &Path) -> Result<(), GraphError> {
    let bytes = export_graph(graph, format)?;
    std::fs::write(path, bytes).map_err(|source| GraphError::Io { path: path.display().to_string(), source })
}

fn cypher_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            _ => out.push(c),
        }
    }
    out
}

fn cypher_script(graph: &KnowledgeGraph) -> String {
    let mut out = String::new();
    for node in graph.nodes() {
        let mut props = format!(
            "id: '{}', term: '{}', description: '{}'",
            cypher_escape(node.id.as_str()),
            cypher_escape(&node.term),
            cypher_escape(&node.description),
        );
        if let (Some(summary), Some(conf)) = (&node.summary, node.summary_confidence) {
            props.push_str(&format!(", summary: '{}', summary_confidence: {}", cypher_escape(summary), conf.get()));
        }
        out.push_str(&format!("CREATE (:Entity {{{props}}});\n"));
    }
    for edge in graph.edges() {
        out.push_str(&format!(
            "MATCH (a:Entity {{id: '{}'}}), (b:Entity {{id: '{}'}}) CREATE (a)-[:RELATES_TO {{label: '{}', annotation: '{}', confidence: {}}}]->(b);\n",
            cypher_escape(edge.src.as_str()),
            cypher_escape(edge.dst.as_str()),
            cypher_escape(&edge.label),
            cypher_escape(&edge.annotation),
            edge.confidence_raw.get(),
        ));
    }
    out
}

fn validation(rule: &'static str, detail: String) -> GraphError {
    GraphError::Validation { rule, detail }
}

/// Parses a portable document back into a graph. Fails atomically: either
/// every invariant holds on the returned graph or an error names the violated
/// rule.
pub fn import_graph(bytes: &[u8]) -> Result<KnowledgeGraph, GraphError> {
    let doc: Document = serde_json::from_slice(bytes).map_err(|e| GraphError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if doc.format_version != FORMAT_VERSION {
        return Err(validation(
            "format-version",
            format!("unsupported format_version {} (expected {FORMAT_VERSION})", doc.format_version),
        ));
    }

    let mut graph = KnowledgeGraph::new();
    graph.metadata = doc.metadata;

    for node_doc in doc.nodes {
        let id = NodeId::from_term(&node_doc.term)
            .map_err(|_| validation("node-term-nonempty", format!("node '{}' has a blank term", node_doc.id)))?;
        if id.as_str() != node_doc.id {
            return Err(validation(
                "node-id-canonical",
                format!("node id '{}' does not match canonical form '{}'", node_doc.id, id),
            ));
        }
        let summary_confidence = match node_doc.summary_confidence {
            Some(v) => Some(RawConfidence::new(v).map_err(|_| {
                validation("summary-confidence-range", format!("node '{}' has summary confidence {}", node_doc.id, v))
            })?),
            None => None,
        };
        if node_doc.summary.is_some() != summary_confidence.is_some() {
            return Err(validation(
                "summary-confidence-pairing",
                format!("node '{}' has a summary without a score or vice versa", node_doc.id),
            ));
        }
        let node = EntityNode {
            id: id.clone(),
            term: node_doc.term,
            description: node_doc.description,
            summary: node_doc.summary,
            summary_confidence,
            sources: node_doc.sources,
        };
        if graph.nodes.insert(id.clone(), node).is_some() {
            return Err(validation("duplicate-node-id", format!("node '{id}' appears twice")));
        }
        graph.adjacency.entry(id).or_default();
    }

    let mut edge_docs: BTreeMap<u64, EdgeDoc> = BTreeMap::new();
    for edge_doc in doc.edges {
        let id = edge_doc.id;
        if edge_docs.insert(id, edge_doc).is_some() {
            return Err(validation("duplicate-edge-id", format!("edge {id} appears twice")));
        }
    }

    for edge_doc in edge_docs.values() {
        let src = NodeId::from_term(&edge_doc.src)
            .map_err(|_| validation("edge-endpoint-exists", format!("edge {} has a blank endpoint", edge_doc.id)))?;
        let dst = NodeId::from_term(&edge_doc.dst)
            .map_err(|_| validation("edge-endpoint-exists", format!("edge {} has a blank endpoint", edge_doc.id)))?;
        for endpoint in [&src, &dst] {
            if !graph.nodes.contains_key(endpoint) {
                return Err(validation(
                    "edge-endpoint-exists",
                    format!("edge {} references missing node '{endpoint}'", edge_doc.id),
                ));
            }
        }
        if src == dst {
            return Err(validation("no-self-loop", format!("edge {} loops on '{src}'", edge_doc.id)));
        }
        let confidence = RawConfidence::new(edge_doc.confidence_raw).map_err(|_| {
            validation(
                "edge-confidence-range",
                format!("edge {} has confidence {}", edge_doc.id, edge_doc.confidence_raw),
            )
        })?;
        let reverse_id = edge_doc.reverse_of.ok_or_else(|| {
            validation("bidirectional-pair", format!("edge {} has no reverse counterpart", edge_doc.id))
        })?;
        let reverse = edge_docs.get(&reverse_id).ok_or_else(|| {
            validation("bidirectional-pair", format!("edge {} references missing reverse {reverse_id}", edge_doc.id))
        })?;
        if reverse.reverse_of != Some(edge_doc.id) || reverse.src != edge_doc.dst || reverse.dst != edge_doc.src {
            return Err(validation(
                "bidirectional-pair",
                format!("edges {} and {} are not a forward/reverse pair", edge_doc.id, reverse_id),
            ));
        }
        let key = (src.clone(), dst.clone(), edge_doc.label.clone());
        if graph.edge_keys.insert(key, EdgeId(edge_doc.id)).is_some() {
            return Err(validation(
                "duplicate-edge-key",
                format!("duplicate relation ({}, {}, '{}')", edge_doc.src, edge_doc.dst, edge_doc.label),
            ));
        }
        graph.edges.insert(
            EdgeId(edge_doc.id),
            Relation {
                id: EdgeId(edge_doc.id),
                src: src.clone(),
                dst,
                label: edge_doc.label.clone(),
                annotation: edge_doc.annotation.clone(),
                confidence_raw: confidence,
                reverse_of: Some(EdgeId(reverse_id)),
                created_at: edge_doc.created_at,
            },
        );
        graph.adjacency.entry(src).or_default().push(EdgeId(edge_doc.id));
    }

    graph.next_edge = graph.edges.keys().map(|e| e.0).max().unwrap_or(0) + 1;
    graph.validate()?;
    Ok(graph)
}

/// Reads and imports a portable document from disk.
pub fn import_graph_from_path(path: &Path) -> Result<KnowledgeGraph, GraphError> {
    let bytes =
        std::fs::read(path).map_err(|source| GraphError::Io { path: path.display().to_string(), source })?;
    import_graph(&bytes)
}
