//! Token-window chunking with fixed overlap.
//!
//! Tokenization is a pluggable boundary; the default counts
//! whitespace-delimited units. Chunk spans are expressed in token indices:
//! consecutive chunks overlap by exactly `overlap` tokens, the stride is
//! `max_tokens - overlap`, and together they cover `[0, token_count)` with
//! no gaps. The final chunk may be shorter.

use super::IngestError;
use serde::{Deserialize, Serialize};

/// Splits text into token byte-spans. Implementations must return spans in
/// document order.
pub trait Tokenizer: Send + Sync {
    fn token_spans(&self, text: &str) -> Vec<(usize, usize)>;
}

/// Default tokenizer: whitespace-delimited units.
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn token_spans(&self, text: &str) -> Vec<(usize, usize)> {
        let mut spans = Vec::new();
        let mut start = None;
        for (i, c) in text.char_indices() {
            if c.is_whitespace() {
                if let Some(s) = start.take() {
                    spans.push((s, i));
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            spans.push((s, text.len()));
        }
        spans
    }
}

/// A corpus fragment: which document it came from, its sequence number
/// there, the text itself, and its token span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub chunk_id: u32,
    pub text: String,
    /// Half-open `(start, end)` in token indices.
    pub token_span: (usize, usize),
}

/// Chunks one document. Empty text (or text with no tokens) yields an empty
/// list; `overlap >= max_tokens` is invalid input.
pub fn chunk_document(
    doc_id: &str,
    text: &str,
    tokenizer: &dyn Tokenizer,
    max_tokens: usize,
    overlap: usize,
) -> Result<Vec<Chunk>, IngestError> {
    if max_tokens == 0 {
        return Err(IngestError::InvalidInput("max_tokens must be at least 1".into()));
    }
    if overlap >= max_tokens {
        return Err(IngestError::InvalidInput(format!(
            "overlap ({overlap}) must be smaller than max_tokens ({max_tokens})"
        )));
    }
    let spans = tokenizer.token_spans(text);
    if spans.is_empty() {
        return Ok(Vec::new());
    }
    let total = spans.len();
    let mut chunks = Vec::new();
    let mut start = 0usize;
    loop {
        let end = (start + max_tokens).min(total);
        let byte_start = spans[start].0;
        let byte_end = spans[end - 1].1;
        chunks.push(Chunk {
            doc_id: doc_id.to_string(),
            chunk_id: chunks.len() as u32,
            text: text[byte_start..byte_end].to_string(),
            token_span: (start, end),
        });
        if end == total {
            break;
        }
        start = end - overlap;
    }
    Ok(chunks)
}
