//! Local-file knowledge source.
//!
//! Two layouts, checked in order:
//! 1. `index.json` in the fixture directory: a map from canonical query to a
//!    list of `{title, snippet, external_id}` entries (needed for long
//!    queries such as whole questions);
//! 2. one `<canonical-term-with-underscores>.txt` file per term, whose
//!    content becomes the snippet of a single result.
//!
//! Unknown terms yield an empty result list.

use super::{SearchClient, SearchError, SearchResult, SearchSource};
use crate::canon::canonical_term;
use chrono::Utc;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, Clone, Deserialize)]
struct IndexEntry {
    title: String,
    snippet: String,
    external_id: String,
}

pub struct FixtureSource {
    dir: PathBuf,
}

impl FixtureSource {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn index_lookup(&self, key: &str) -> Result<Option<Vec<IndexEntry>>, SearchError> {
        let index_path = self.dir.join("index.json");
        if !index_path.exists() {
            return Ok(None);
        }
        let bytes = std::fs::read(&index_path)
            .map_err(|source| SearchError::Io { path: index_path.display().to_string(), source })?;
        let index: BTreeMap<String, Vec<IndexEntry>> = serde_json::from_slice(&bytes)
            .map_err(|e| SearchError::Protocol(format!("malformed fixture index {}: {e}", index_path.display())))?;
        Ok(index
            .into_iter()
            .find(|(query, _)| canonical_term(query) == key)
            .map(|(_, entries)| entries))
    }

    fn file_name_for(key: &str) -> String {
        let mut name: String = key
            .chars()
            .map(|c| if c.is_alphanumeric() { c } else { '_' })
            .collect();
        name.push_str(".txt");
        name
    }
}

impl SearchClient for FixtureSource {
    fn source(&self) -> SearchSource {
        SearchSource::Fixture
    }

    fn fetch(&self, term: &str, top_n: usize) -> Result<Vec<SearchResult>, SearchError> {
        let key = canonical_term(term);
        if let Some(entries) = self.index_lookup(&key)? {
            return Ok(entries
                .into_iter()
                .take(top_n)
                .map(|entry| SearchResult {
                    source: SearchSource::Fixture,
                    query: key.clone(),
                    title: entry.title,
                    snippet: entry.snippet,
                    external_id: entry.external_id,
                    retrieved_at: Utc::now(),
                })
                .collect());
        }

        let path = self.dir.join(Self::file_name_for(&key));
        if !path.exists() {
            return Ok(Vec::new());
        }
        let content = std::fs::read_to_string(&path)
            .map_err(|source| SearchError::Io { path: path.display().to_string(), source })?;
        let snippet = content.trim().to_string();
        if snippet.is_empty() {
            return Ok(Vec::new());
        }
        Ok(vec![SearchResult {
            source: SearchSource::Fixture,
            query: key.clone(),
            title: term.trim().to_string(),
            snippet,
            external_id: format!("fixture:{key}"),
            retrieved_at: Utc::now(),
        }]
        .into_iter()
        .take(top_n)
        .collect())
    }
}
