//! TTL cache for search results.

use super::{Clock, SearchResult, SearchSource};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Instant {
        Instant::now()
    }

    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Virtual clock for tests: `sleep` advances time instead of blocking.
pub struct ManualClock {
    origin: Instant,
    elapsed: Mutex<Duration>,
}

impl ManualClock {
    pub fn new() -> Self {
        Self { origin: Instant::now(), elapsed: Mutex::new(Duration::ZERO) }
    }

    pub fn advance(&self, by: Duration) {
        *self.elapsed.lock().expect("clock lock poisoned") += by;
    }
}

impl Default for ManualClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Instant {
        self.origin + *self.elapsed.lock().expect("clock lock poisoned")
    }

    fn sleep(&self, duration: Duration) {
        self.advance(duration);
    }
}

struct CacheEntry {
    results: Vec<SearchResult>,
    fetched_at: Instant,
}

/// Keyed store `(source, canonical query) -> results`, expired entries never
/// served. Concurrent readers, serialized writers.
pub struct SearchCache {
    entries: RwLock<HashMap<(SearchSource, String), CacheEntry>>,
    ttl: Duration,
    clock: Arc<dyn Clock>,
}

impl SearchCache {
    pub fn new(ttl: Duration, clock: Arc<dyn Clock>) -> Self {
        Self { entries: RwLock::new(HashMap::new()), ttl, clock }
    }

    pub fn get(&self, source: SearchSource, key: &str) -> Option<Vec<SearchResult>> {
        let entries = self.entries.read().expect("cache lock poisoned");
        let entry = entries.get(&(source, key.to_string()))?;
        if self.clock.now().duration_since(entry.fetched_at) >= self.ttl {
            return None;
        }
        Some(entry.results.clone())
    }

    pub fn put(&self, source: SearchSource, key: &str, results: Vec<SearchResult>) {
        let mut entries = self.entries.write().expect("cache lock poisoned");
        entries.insert((source, key.to_string()), CacheEntry { results, fetched_at: self.clock.now() });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Utc;

    fn result(source: SearchSource, query: &str, snippet: &str) -> SearchResult {
        SearchResult {
            source,
            query: query.into(),
            title: query.into(),
            snippet: snippet.into(),
            external_id: format!("{source}:{query}"),
            retrieved_at: Utc::now(),
        }
    }

    #[test]
    fn expired_entries_are_never_served() {
        let clock = Arc::new(ManualClock::new());
        let cache = SearchCache::new(Duration::from_secs(10), clock.clone());
        cache.put(SearchSource::Fixture, "a", vec![result(SearchSource::Fixture, "a", "x")]);
        assert!(cache.get(SearchSource::Fixture, "a").is_some());
        clock.advance(Duration::from_secs(10));
        assert!(cache.get(SearchSource::Fixture, "a").is_none());
    }

    #[test]
    fn a_hit_equals_the_last_fetched_value() {
        let clock = Arc::new(ManualClock::new());
        let cache = SearchCache::new(Duration::from_secs(10), clock);
        cache.put(SearchSource::Wiki, "a", vec![result(SearchSource::Wiki, "a", "old")]);
        cache.put(SearchSource::Wiki, "a", vec![result(SearchSource::Wiki, "a", "new")]);
        let hit = cache.get(SearchSource::Wiki, "a").unwrap();
        assert_eq!(hit[0].snippet, "new");
    }

    #[test]
    fn sources_never_share_a_key() {
        let clock = Arc::new(ManualClock::new());
        let cache = SearchCache::new(Duration::from_secs(10), clock);
        cache.put(SearchSource::Pubmed, "a", vec![result(SearchSource::Pubmed, "a", "pubmed text")]);
        cache.put(SearchSource::Wiki, "a", vec![result(SearchSource::Wiki, "a", "wiki text")]);
        assert_eq!(cache.get(SearchSource::Pubmed, "a").unwrap()[0].snippet, "pubmed text");
        assert_eq!(cache.get(SearchSource::Wiki, "a").unwrap()[0].snippet, "wiki text");
        assert!(cache.get(SearchSource::Fixture, "a").is_none());
    }
}
