//! Corpus ingestion and vector retrieval for the retrieval baselines.
//!
//! Plain-text documents are chunked on token windows (512 tokens max, 100
//! overlap by default), embedded, and indexed with their document/chunk
//! metadata. Retrieval is an exact cosine scan — desk-scale corpora don't
//! need approximate structures and exactness keeps the oracle tests honest.
//! A per-file log keyed on content hashes makes re-ingestion idempotent.

mod chunk;
mod corpus;
mod embed;
mod index;
mod log;

pub use chunk::{chunk_document, Chunk, Tokenizer, WhitespaceTokenizer};
pub use corpus::{ingest_corpus, IngestOptions, IngestReport};
pub use embed::{Embedder, HashEmbedder, HttpEmbedder};
pub use index::{query_topk, ChunkRetriever, IndexSearcher, VectorIndex};
pub use log::{FileStatus, IngestLog, LogEntry};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("the vector index is empty")]
    EmptyIndex,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
