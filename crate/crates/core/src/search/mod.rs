//! Retrieval of entity descriptions from external knowledge sources.
//!
//! A [`SearchClient`] knows how to fetch raw results for one source; the
//! [`CachedSearcher`] wraps any client with a TTL cache keyed on the
//! canonicalized term (the same rule as node identity, so cache hits align
//! with graph entities) and an optional rate limiter. The `fixture` source
//! reads from local files so the whole pipeline runs offline.

mod cache;
mod fixture;
mod http;
mod limiter;

pub use cache::{ManualClock, SearchCache, SystemClock};
pub use fixture::FixtureSource;
pub use http::{PubmedStyleClient, SearchHttpConfig, WikiStyleClient};
pub use limiter::RateLimiter;

use crate::canon::canonical_term;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Protocol(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Which knowledge source a result came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchSource {
    Pubmed,
    Wiki,
    Fixture,
}

impl fmt::Display for SearchSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Pubmed => f.write_str("pubmed"),
            Self::Wiki => f.write_str("wiki"),
            Self::Fixture => f.write_str("fixture"),
        }
    }
}

impl std::str::FromStr for SearchSource {
    type Err = SearchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pubmed" => Ok(Self::Pubmed),
            "wiki" => Ok(Self::Wiki),
            "fixture" => Ok(Self::Fixture),
            other => Err(SearchError::InvalidInput(format!(
                "unknown source '{other}' (expected pubmed|wiki|fixture)"
            ))),
        }
    }
}

/// One retrieved description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub source: SearchSource,
    pub query: String,
    pub title: String,
    pub snippet: String,
    pub external_id: String,
    pub retrieved_at: DateTime<Utc>,
}

/// Raw access to one knowledge source.
pub trait SearchClient: Send + Sync {
    fn source(&self) -> SearchSource;
    /// Fetches up to `top_n` results for a term, in source order. Zero hits
    /// is an empty list, not an error.
    fn fetch(&self, term: &str, top_n: usize) -> Result<Vec<SearchResult>, SearchError>;
}

/// Per-term outcome report of a cache warm-up.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WarmReport {
    pub fetched: usize,
    pub failures: Vec<(String, String)>,
}

/// A search client behind the shared cache and an optional rate limiter.
///
/// Cache hits bypass both the limiter and the network entirely; the limiter
/// gates only outbound fetches.
pub struct CachedSearcher {
    client: Box<dyn SearchClient>,
    cache: SearchCache,
    limiter: Option<RateLimiter>,
}

impl CachedSearcher {
    pub fn new(client: Box<dyn SearchClient>, cache: SearchCache, limiter: Option<RateLimiter>) -> Self {
        Self { client, cache, limiter }
    }

    /// Offline searcher over a fixture directory with a long-lived cache.
    pub fn fixture(dir: impl Into<std::path::PathBuf>) -> Self {
        Self::new(
            Box::new(FixtureSource::new(dir)),
            SearchCache::new(Duration::from_secs(3600), Arc::new(SystemClock)),
            None,
        )
    }

    pub fn source(&self) -> SearchSource {
        self.client.source()
    }

    /// Descriptions for a term: served from cache when fresh, fetched (and
    /// cached) otherwise.
    pub fn search_descriptions(&self, term: &str, top_n: usize) -> Result<Vec<SearchResult>, SearchError> {
        let key = self.validate(term, top_n)?;
        if let Some(hit) = self.cache.get(self.client.source(), &key) {
            let mut results = hit;
            results.truncate(top_n);
            return Ok(results);
        }
        self.fetch_and_cache(term, &key, top_n)
    }

    /// Always refetches (refresh path), replacing the cached entry.
    pub fn search_fresh(&self, term: &str, top_n: usize) -> Result<Vec<SearchResult>, SearchError> {
        let key = self.validate(term, top_n)?;
        self.fetch_and_cache(term, &key, top_n)
    }

    /// Prefetches a batch of terms. Per-term failures (including zero hits)
    /// are recorded, never aborting the batch.
    pub fn warm_cache(&self, terms: &[String], top_n: usize) -> Result<WarmReport, SearchError> {
        if terms.is_empty() {
            return Err(SearchError::InvalidInput("warm_cache needs at least one term".into()));
        }
        let mut report = WarmReport::default();
        for term in terms {
            match self.search_descriptions(term, top_n) {
                Ok(results) if results.is_empty() => {
                    report.failures.push((term.clone(), "no results".into()));
                }
                Ok(_) => report.fetched += 1,
                Err(e) => report.failures.push((term.clone(), e.to_string())),
            }
        }
        Ok(report)
    }

    fn validate(&self, term: &str, top_n: usize) -> Result<String, SearchError> {
        if top_n == 0 {
            return Err(SearchError::InvalidInput("top_n must be at least 1".into()));
        }
        let key = canonical_term(term);
        if key.is_empty() {
            return Err(SearchError::InvalidInput("term must be non-empty".into()));
        }
        Ok(key)
    }

    fn fetch_and_cache(&self, term: &str, key: &str, top_n: usize) -> Result<Vec<SearchResult>, SearchError> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire();
        }
        let results = self.client.fetch(term, top_n)?;
        self.cache.put(self.client.source(), key, results.clone());
        Ok(results)
    }
}

/// Clock abstraction so cache expiry and rate limiting are testable with a
/// virtual clock.
pub trait Clock: Send + Sync {
    fn now(&self) -> Instant;
    fn sleep(&self, duration: Duration);
}
