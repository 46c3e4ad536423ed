//! Embedding contracts.
//!
//! [`HashEmbedder`] is the deterministic test/offline embedder: tokens are
//! hashed (FNV-1a, platform-stable) into signed buckets and the result is
//! L2-normalized, so identical text always maps to the identical vector.
//! Production embedding is an HTTP contract: POST `{"texts": [..]}`, reply
//! `{"vectors": [[..]]}`.

use super::IngestError;
use num_traits::Float;
use std::marker::PhantomData;
use std::time::Duration;

pub trait Embedder<F: Float>: Send + Sync {
    fn dimension(&self) -> usize;
    /// One vector per input text. The list must be non-empty.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<F>>, IngestError>;
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Deterministic hash-projection embedder.
pub struct HashEmbedder<F> {
    dimension: usize,
    _scalar: PhantomData<F>,
}

impl<F: Float> HashEmbedder<F> {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension >= 1, "embedding dimension must be at least 1");
        Self { dimension, _scalar: PhantomData }
    }

    fn embed_one(&self, text: &str) -> Vec<F> {
        let mut accumulator = vec![0.0f64; self.dimension];
        for token in text.split_whitespace() {
            let hash = fnv1a64(token.to_lowercase().as_bytes());
            let bucket = (hash % self.dimension as u64) as usize;
            let sign = if hash >> 63 == 0 { 1.0 } else { -1.0 };
            accumulator[bucket] += sign;
        }
        let norm = accumulator.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut accumulator {
                *v /= norm;
            }
        }
        accumulator
            .into_iter()
            .map(|v| F::from(v).expect("normalized component fits any float"))
            .collect()
    }
}

impl<F: Float + Send + Sync> Embedder<F> for HashEmbedder<F> {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<F>>, IngestError> {
        if texts.is_empty() {
            return Err(IngestError::InvalidInput("embed needs at least one text".into()));
        }
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// HTTP embedding provider: `POST {endpoint}` with `{"texts": [..]}`,
/// expects `{"vectors": [[..]]}` of the configured dimension.
pub struct HttpEmbedder {
    endpoint: String,
    dimension: usize,
    client: reqwest::blocking::Client,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, dimension: usize, timeout: Duration) -> Result<Self, IngestError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| IngestError::Transport(format!("cannot build http client: {e}")))?;
        Ok(Self { endpoint: endpoint.into(), dimension, client })
    }
}

impl Embedder<f64> for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, IngestError> {
        if texts.is_empty() {
            return Err(IngestError::InvalidInput("embed needs at least one text".into()));
        }
        let response = self
            .client
            .post(&self.endpoint)
            .json(&serde_json::json!({ "texts": texts }))
            .send()
            .map_err(|e| IngestError::Transport(format!("embedding request failed: {e}")))?;
        let status = response.status();
        if !status.is_success() {
            return Err(IngestError::Transport(format!("embedding endpoint returned {status}")));
        }
        #[derive(serde::Deserialize)]
        struct Reply {
            vectors: Vec<Vec<f64>>,
        }
        let reply: Reply = response
            .json()
            .map_err(|e| IngestError::Parse(format!("embedding reply malformed: {e}")))?;
        if reply.vectors.len() != texts.len() {
            return Err(IngestError::Validation(format!(
                "expected {} vectors, got {}",
                texts.len(),
                reply.vectors.len()
            )));
        }
        for vector in &reply.vectors {
            if vector.len() != self.dimension {
                return Err(IngestError::Validation(format!(
                    "embedding dimension {} does not match configured {}",
                    vector.len(),
                    self.dimension
                )));
            }
        }
        Ok(reply.vectors)
    }
}
