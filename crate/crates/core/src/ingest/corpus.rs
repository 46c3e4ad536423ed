//! Batch corpus ingestion: walk a directory of plain-text files, chunk,
//! embed in bounded batches, index, and log each file so reruns skip
//! unchanged content. Per-file failures are recorded without aborting the
//! batch.

use super::{chunk_document, Embedder, FileStatus, IngestError, IngestLog, LogEntry, Tokenizer, VectorIndex};
use chrono::Utc;
use num_traits::Float;
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub max_tokens: usize,
    pub overlap: usize,
    /// Upper bound on chunks per embedding batch.
    pub batch_size: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { max_tokens: 512, overlap: 100, batch_size: 10_000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub processed: usize,
    pub skipped: usize,
    pub chunks_indexed: usize,
    pub failures: Vec<(String, String)>,
}

fn content_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Ingests every regular file in `dir` (sorted by name, so runs are
/// deterministic). Changed files are re-chunked and their old index entries
/// replaced; unchanged `done` files are skipped.
pub fn ingest_corpus<F: Float>(
    dir: &Path,
    options: &IngestOptions,
    tokenizer: &dyn Tokenizer,
    embedder: &dyn Embedder<F>,
    index: &mut VectorIndex<F>,
    log: &mut IngestLog,
) -> Result<IngestReport, IngestError> {
    if options.batch_size == 0 {
        return Err(IngestError::InvalidInput("batch_size must be at least 1".into()));
    }
    let mut names: Vec<_> = std::fs::read_dir(dir)
        .map_err(|source| IngestError::Io { path: dir.display().to_string(), source })?
        .filter_map(|entry| entry.ok())
        .filter(|entry| entry.path().is_file())
        .map(|entry| entry.path())
        .collect();
    names.sort();

    let mut report = IngestReport::default();
    for path in names {
        let doc_id = path
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_else(|| path.display().to_string());
        let bytes = match std::fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) => {
                let reason = format!("unreadable: {e}");
                log.record(LogEntry {
                    path: doc_id.clone(),
                    status: FileStatus::Failed { reason: reason.clone() },
                    content_hash: String::new(),
                    timestamp: Utc::now(),
                });
                report.failures.push((doc_id, reason));
                continue;
            }
        };
        let hash = content_hash(&bytes);
        if !log.needs_processing(&doc_id, &hash) {
            report.skipped += 1;
            continue;
        }
        let text = match String::from_utf8(bytes) {
            Ok(text) => text,
            Err(e) => {
                let reason = format!("not valid utf-8: {e}");
                log.record(LogEntry {
                    path: doc_id.clone(),
                    status: FileStatus::Failed { reason: reason.clone() },
                    content_hash: hash,
                    timestamp: Utc::now(),
                });
                report.failures.push((doc_id, reason));
                continue;
            }
        };
        match ingest_one(&doc_id, &text, options, tokenizer, embedder, index) {
            Ok(chunks) => {
                report.processed += 1;
                report.chunks_indexed += chunks;
                log.record(LogEntry {
                    path: doc_id,
                    status: FileStatus::Done,
                    content_hash: hash,
                    timestamp: Utc::now(),
                });
            }
            Err(e) => {
                let reason = e.to_string();
                log.record(LogEntry {
                    path: doc_id.clone(),
                    status: FileStatus::Failed { reason: reason.clone() },
                    content_hash: hash,
                    timestamp: Utc::now(),
                });
                report.failures.push((doc_id, reason));
            }
        }
    }
    Ok(report)
}

fn ingest_one<F: Float>(
    doc_id: &str,
    text: &str,
    options: &IngestOptions,
    tokenizer: &dyn Tokenizer,
    embedder: &dyn Embedder<F>,
    index: &mut VectorIndex<F>,
) -> Result<usize, IngestError> {
    let chunks = chunk_document(doc_id, text, tokenizer, options.max_tokens, options.overlap)?;
    index.remove_doc(doc_id);
    if chunks.is_empty() {
        return Ok(0);
    }
    let mut indexed = 0usize;
    for batch in chunks.chunks(options.batch_size) {
        let texts: Vec<String> = batch.iter().map(|c| c.text.clone()).collect();
        let vectors = embedder.embed(&texts)?;
        for (vector, chunk) in vectors.into_iter().zip(batch.iter().cloned()) {
            index.add(vector, chunk)?;
            indexed += 1;
        }
    }
    Ok(indexed)
}
