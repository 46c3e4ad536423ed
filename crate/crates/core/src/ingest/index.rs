//! Exact cosine vector index with chunk metadata.

use super::{Chunk, Embedder, IngestError};
use num_traits::Float;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry<F> {
    pub vector: Vec<F>,
    pub chunk: Chunk,
}

/// Flat store of `(vector, chunk)` entries with one shared dimension and a
/// `(doc_id, chunk_id)` uniqueness guarantee. Queries are exact linear scans
/// under cosine similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Serialize", deserialize = "F: DeserializeOwned"))]
pub struct VectorIndex<F> {
    format_version: u32,
    dimension: usize,
    entries: Vec<IndexEntry<F>>,
    #[serde(skip)]
    keys: BTreeSet<(String, u32)>,
}

impl<F: Float> VectorIndex<F> {
    pub fn new(dimension: usize) -> Self {
        Self { format_version: INDEX_FORMAT_VERSION, dimension, entries: Vec::new(), keys: BTreeSet::new() }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry<F>] {
        &self.entries
    }

    pub fn add(&mut self, vector: Vec<F>, chunk: Chunk) -> Result<(), IngestError> {
        if vector.len() != self.dimension {
            return Err(IngestError::Validation(format!(
                "vector dimension {} does not match index dimension {}",
                vector.len(),
                self.dimension
            )));
        }
        let key = (chunk.doc_id.clone(), chunk.chunk_id);
        if !self.keys.insert(key) {
            return Err(IngestError::Validation(format!(
                "duplicate entry ({}, {})",
                chunk.doc_id, chunk.chunk_id
            )));
        }
        self.entries.push(IndexEntry { vector, chunk });
        Ok(())
    }

    /// Drops every entry of a document (used when a changed file is
    /// re-ingested).
    pub fn remove_doc(&mut self, doc_id: &str) -> usize {
        let before = self.entries.len();
        self.entries.retain(|e| e.chunk.doc_id != doc_id);
        self.keys.retain(|(d, _)| d != doc_id);
        before - self.entries.len()
    }

    /// Top-k entries by cosine similarity to the query vector, descending,
    /// ties broken by `(doc_id, chunk_id)`.
    pub fn query_vector(&self, query: &[F], k: usize) -> Result<Vec<(Chunk, F)>, IngestError> {
        if k == 0 {
            return Err(IngestError::InvalidInput("k must be at least 1".into()));
        }
        if self.entries.is_empty() {
            return Err(IngestError::EmptyIndex);
        }
        if query.len() != self.dimension {
            return Err(IngestError::Validation(format!(
                "query dimension {} does not match index dimension {}",
                query.len(),
                self.dimension
            )));
        }
        let mut scored: Vec<(&IndexEntry<F>, F)> =
            self.entries.iter().map(|e| (e, cosine_similarity(query, &e.vector))).collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("similarities are never NaN")
                .then_with(|| a.0.chunk.doc_id.cmp(&b.0.chunk.doc_id))
                .then(a.0.chunk.chunk_id.cmp(&b.0.chunk.chunk_id))
        });
        Ok(scored.into_iter().take(k).map(|(e, s)| (e.chunk.clone(), s)).collect())
    }

    pub fn save(&self, path: &Path) -> Result<(), IngestError>
    where
        F: Serialize,
    {
        let bytes = serde_json::to_vec(self).map_err(|e| IngestError::Validation(e.to_string()))?;
        std::fs::write(path, bytes).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, IngestError>
    where
        F: DeserializeOwned,
    {
        let bytes =
            std::fs::read(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
        let mut index: Self =
            serde_json::from_slice(&bytes).map_err(|e| IngestError::Parse(format!("{}: {e}", path.display())))?;
        if index.format_version != INDEX_FORMAT_VERSION {
            return Err(IngestError::Validation(format!(
                "unsupported index format_version {} (expected {INDEX_FORMAT_VERSION})",
                index.format_version
            )));
        }
        index.keys = index.entries.iter().map(|e| (e.chunk.doc_id.clone(), e.chunk.chunk_id)).collect();
        if index.keys.len() != index.entries.len() {
            return Err(IngestError::Validation("index contains duplicate (doc_id, chunk_id) entries".into()));
        }
        for entry in &index.entries {
            if entry.vector.len() != index.dimension {
                return Err(IngestError::Validation("index entry dimension mismatch".into()));
            }
        }
        Ok(index)
    }
}

/// Cosine similarity; zero vectors score 0.
pub fn cosine_similarity<F: Float>(a: &[F], b: &[F]) -> F {
    let mut dot = F::zero();
    let mut norm_a = F::zero();
    let mut norm_b = F::zero();
    for (x, y) in a.iter().zip(b) {
        dot = dot + *x * *y;
        norm_a = norm_a + *x * *x;
        norm_b = norm_b + *y * *y;
    }
    if norm_a == F::zero() || norm_b == F::zero() {
        return F::zero();
    }
    dot / (norm_a.sqrt() * norm_b.sqrt())
}

/// Embeds a question and queries the index.
pub fn query_topk<F: Float>(
    index: &VectorIndex<F>,
    embedder: &dyn Embedder<F>,
    question: &str,
    k: usize,
) -> Result<Vec<(Chunk, F)>, IngestError> {
    if embedder.dimension() != index.dimension() {
        return Err(IngestError::Validation(format!(
            "embedder dimension {} does not match index dimension {}",
            embedder.dimension(),
            index.dimension()
        )));
    }
    let vectors = embedder.embed(&[question.to_string()])?;
    index.query_vector(&vectors[0], k)
}

/// Object-safe retrieval facade used by the QA pipeline; similarity is
/// reported at the default scalar.
pub trait ChunkRetriever: Send + Sync {
    fn query_topk(&self, question: &str, k: usize) -> Result<Vec<(Chunk, f64)>, IngestError>;
    fn is_empty(&self) -> bool;
}

/// Bundles an index with its embedder.
pub struct IndexSearcher<F, E> {
    pub index: VectorIndex<F>,
    pub embedder: E,
}

impl<F: Float, E: Embedder<F>> IndexSearcher<F, E> {
    pub fn new(index: VectorIndex<F>, embedder: E) -> Self {
        Self { index, embedder }
    }
}

impl<F: Float + Send + Sync, E: Embedder<F>> ChunkRetriever for IndexSearcher<F, E> {
    fn query_topk(&self, question: &str, k: usize) -> Result<Vec<(Chunk, f64)>, IngestError> {
        let hits = query_topk(&self.index, &self.embedder, question, k)?;
        Ok(hits
            .into_iter()
            .map(|(chunk, sim)| (chunk, sim.to_f64().expect("similarity fits f64")))
            .collect())
    }

    fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::super::HashEmbedder;
    use super::*;

    fn chunk(doc: &str, id: u32, text: &str) -> Chunk {
        Chunk { doc_id: doc.into(), chunk_id: id, text: text.into(), token_span: (0, 1) }
    }

    fn indexed_fixture() -> (VectorIndex<f64>, HashEmbedder<f64>) {
        let embedder = HashEmbedder::<f64>::new(32);
        let mut index = VectorIndex::new(32);
        for (i, text) in [
            "clopidogrel prevents stent thrombosis",
            "levodopa treats parkinson disease",
            "nitroglycerin relieves angina",
        ]
        .iter()
        .enumerate()
        {
            let v = embedder.embed(&[text.to_string()]).unwrap().remove(0);
            index.add(v, chunk("docs.txt", i as u32, text)).unwrap();
        }
        (index, embedder)
    }

    #[test]
    fn self_query_ranks_first_at_unit_similarity() {
        let (index, embedder) = indexed_fixture();
        let hits = query_topk(&index, &embedder, "levodopa treats parkinson disease", 3).unwrap();
        assert_eq!(hits[0].0.chunk_id, 1);
        assert!((hits[0].1 - 1.0).abs() < 1e-9, "self-similarity was {}", hits[0].1);
    }

    #[test]
    fn k_larger_than_index_returns_everything() {
        let (index, embedder) = indexed_fixture();
        let hits = query_topk(&index, &embedder, "anything at all", 50).unwrap();
        assert_eq!(hits.len(), 3);
    }

    #[test]
    fn empty_index_is_an_error() {
        let embedder = HashEmbedder::<f64>::new(32);
        let index = VectorIndex::<f64>::new(32);
        assert!(matches!(query_topk(&index, &embedder, "q", 3), Err(IngestError::EmptyIndex)));
    }

    #[test]
    fn zero_k_is_invalid() {
        let (index, embedder) = indexed_fixture();
        assert!(matches!(query_topk(&index, &embedder, "q", 0), Err(IngestError::InvalidInput(_))));
    }

    #[test]
    fn duplicate_chunk_keys_rejected() {
        let mut index = VectorIndex::<f64>::new(2);
        index.add(vec![1.0, 0.0], chunk("d", 0, "a")).unwrap();
        let err = index.add(vec![0.0, 1.0], chunk("d", 0, "b")).unwrap_err();
        assert!(matches!(err, IngestError::Validation(_)));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut index = VectorIndex::<f64>::new(2);
        assert!(matches!(index.add(vec![1.0], chunk("d", 0, "a")), Err(IngestError::Validation(_))));
        let embedder = HashEmbedder::<f64>::new(3);
        index.add(vec![1.0, 0.0], chunk("d", 0, "a")).unwrap();
        assert!(matches!(query_topk(&index, &embedder, "q", 1), Err(IngestError::Validation(_))));
    }

    #[test]
    fn save_load_round_trip() {
        let (index, _) = indexed_fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.json");
        index.save(&path).unwrap();
        let loaded = VectorIndex::<f64>::load(&path).unwrap();
        assert_eq!(index, loaded);
    }

    #[test]
    fn ties_break_on_doc_then_chunk_id() {
        let mut index = VectorIndex::<f64>::new(2);
        // identical vectors so all similarities tie
        index.add(vec![1.0, 0.0], chunk("b.txt", 0, "x")).unwrap();
        index.add(vec![1.0, 0.0], chunk("a.txt", 1, "x")).unwrap();
        index.add(vec![1.0, 0.0], chunk("a.txt", 0, "x")).unwrap();
        let hits = index.query_vector(&[1.0, 0.0], 3).unwrap();
        let order: Vec<(String, u32)> = hits.iter().map(|(c, _)| (c.doc_id.clone(), c.chunk_id)).collect();
        assert_eq!(order, vec![("a.txt".into(), 0), ("a.txt".into(), 1), ("b.txt".into(), 0)]);
    }
}
