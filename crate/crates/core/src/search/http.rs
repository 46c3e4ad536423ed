//! HTTP knowledge-source clients.
//!
//! `PubmedStyleClient` speaks a two-step id-search/abstract-fetch protocol:
//! `GET {base}/esearch?term=..&retmax=N` returning `{"ids": [..]}`, then
//! `GET {base}/efetch?ids=a,b` returning `{"articles": [{id, title,
//! abstract}]}`. `WikiStyleClient` does title search plus extract fetch:
//! `GET {base}/search?q=..&limit=N` returning `{"titles": [..]}`, then
//! `GET {base}/extract?title=..` returning `{"title", "extract"}`. Both
//! retry 429/5xx responses with exponential backoff and read an optional API
//! key from an environment variable per request.

use super::{SearchClient, SearchError, SearchResult, SearchSource};
use crate::canon::canonical_term;
use chrono::Utc;
use serde::Deserialize;
use std::time::Duration;

/// Connection settings shared by the HTTP search clients.
#[derive(Debug, Clone)]
pub struct SearchHttpConfig {
    pub base_url: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub retry_base: Duration,
    /// Environment variable holding an API key; appended as `api_key=` when
    /// set.
    pub api_key_env: String,
}

impl SearchHttpConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            timeout: Duration::from_secs(30),
            max_retries: 3,
            retry_base: Duration::from_millis(200),
            api_key_env: "MEDKG_SEARCH_API_KEY".into(),
        }
    }
}

struct HttpFetcher {
    config: SearchHttpConfig,
    client: reqwest::blocking::Client,
}

impl HttpFetcher {
    fn new(config: SearchHttpConfig) -> Result<Self, SearchError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| SearchError::Transport(format!("cannot build http client: {e}")))?;
        Ok(Self { config, client })
    }

    /// GET with bounded retries on 429/5xx; parses the body as JSON.
    fn get_json(&self, path_and_query: &str) -> Result<serde_json::Value, SearchError> {
        let mut url = format!("{}{}", self.config.base_url, path_and_query);
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            url.push_str(if url.contains('?') { "&" } else { "?" });
            url.push_str(&format!("api_key={key}"));
        }
        let mut last_error = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.config.retry_base * 2u32.saturating_pow(attempt - 1));
            }
            match self.client.get(&url).send() {
                Err(e) => last_error = format!("request failed: {e}"),
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        let text = response
                            .text()
                            .map_err(|e| SearchError::Transport(format!("cannot read response body: {e}")))?;
                        return serde_json::from_str(&text)
                            .map_err(|e| SearchError::Protocol(format!("response is not valid JSON: {e}")));
                    }
                    if status.as_u16() == 429 || status.is_server_error() {
                        last_error = format!("retryable status {status}");
                        continue;
                    }
                    return Err(SearchError::Transport(format!("endpoint returned {status}")));
                }
            }
        }
        Err(SearchError::Transport(format!(
            "giving up after {} attempts: {last_error}",
            self.config.max_retries + 1
        )))
    }
}

fn encode(component: &str) -> String {
    let mut out = String::new();
    for byte in component.bytes() {
        match byte {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => out.push(byte as char),
            b' ' => out.push('+'),
            other => out.push_str(&format!("%{other:02X}")),
        }
    }
    out
}

#[derive(Deserialize)]
struct IdList {
    ids: Vec<String>,
}

#[derive(Deserialize)]
struct ArticleList {
    articles: Vec<Article>,
}

#[derive(Deserialize)]
struct Article {
    id: String,
    #[serde(default)]
    title: String,
    #[serde(rename = "abstract", default)]
    abstract_text: String,
}

/// Term search returning ids, then abstract fetch.
pub struct PubmedStyleClient {
    fetcher: HttpFetcher,
}

impl PubmedStyleClient {
    pub fn new(config: SearchHttpConfig) -> Result<Self, SearchError> {
        Ok(Self { fetcher: HttpFetcher::new(config)? })
    }
}

impl SearchClient for PubmedStyleClient {
    fn source(&self) -> SearchSource {
        SearchSource::Pubmed
    }

    fn fetch(&self, term: &str, top_n: usize) -> Result<Vec<SearchResult>, SearchError> {
        let query = canonical_term(term);
        let search = self.fetcher.get_json(&format!("/esearch?term={}&retmax={top_n}", encode(&query)))?;
        let ids: IdList = serde_json::from_value(search)
            .map_err(|e| SearchError::Protocol(format!("esearch reply missing 'ids': {e}")))?;
        if ids.ids.is_empty() {
            return Ok(Vec::new());
        }
        let joined = ids.ids.iter().take(top_n).cloned().collect::<Vec<_>>().join(",");
        let fetched = self.fetcher.get_json(&format!("/efetch?ids={}", encode(&joined)))?;
        let articles: ArticleList = serde_json::from_value(fetched)
            .map_err(|e| SearchError::Protocol(format!("efetch reply missing 'articles': {e}")))?;
        Ok(articles
            .articles
            .into_iter()
            .filter(|a| !a.abstract_text.trim().is_empty())
            .take(top_n)
            .map(|a| SearchResult {
                source: SearchSource::Pubmed,
                query: query.clone(),
                title: a.title,
                snippet: a.abstract_text,
                external_id: format!("pubmed:{}", a.id),
                retrieved_at: Utc::now(),
            })
            .collect())
    }
}

#[derive(Deserialize)]
struct TitleList {
    titles: Vec<String>,
}

#[derive(Deserialize)]
struct Extract {
    title: String,
    extract: String,
}

/// Title search plus extract fetch.
pub struct WikiStyleClient {
    fetcher: HttpFetcher,
}

impl WikiStyleClient {
    pub fn new(config: SearchHttpConfig) -> Result<Self, SearchError> {
        Ok(Self { fetcher: HttpFetcher::new(config)? })
    }
}

impl SearchClient for WikiStyleClient {
    fn source(&self) -> SearchSource {
        SearchSource::Wiki
    }

    fn fetch(&self, term: &str, top_n: usize) -> Result<Vec<SearchResult>, SearchError> {
        let query = canonical_term(term);
        let search = self.fetcher.get_json(&format!("/search?q={}&limit={top_n}", encode(&query)))?;
        let titles: TitleList = serde_json::from_value(search)
            .map_err(|e| SearchError::Protocol(format!("search reply missing 'titles': {e}")))?;
        let mut results = Vec::new();
        for title in titles.titles.into_iter().take(top_n) {
            let value = self.fetcher.get_json(&format!("/extract?title={}", encode(&title)))?;
            let extract: Extract = serde_json::from_value(value)
                .map_err(|e| SearchError::Protocol(format!("extract reply malformed: {e}")))?;
            if extract.extract.trim().is_empty() {
                continue;
            }
            results.push(SearchResult {
                source: SearchSource::Wiki,
                query: query.clone(),
                title: extract.title.clone(),
                snippet: extract.extract,
                external_id: format!("wiki:{}", canonical_term(&extract.title)),
                retrieved_at: Utc::now(),
            });
        }
        Ok(results)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testhttp::serve;
    use std::sync::atomic::Ordering;

    fn fast(base: String) -> SearchHttpConfig {
        let mut config = SearchHttpConfig::new(base);
        config.retry_base = Duration::from_millis(1);
        config.max_retries = 2;
        config
    }

    #[test]
    fn pubmed_style_two_step_fetch() {
        let (base, hits) = serve(vec![
            (200, serde_json::json!({"ids": ["101", "102"]}).to_string()),
            (
                200,
                serde_json::json!({"articles": [
                    {"id": "101", "title": "Botulinum toxin review", "abstract": "Blocks acetylcholine release."},
                    {"id": "102", "title": "Empty", "abstract": "  "}
                ]})
                .to_string(),
            ),
        ]);
        let client = PubmedStyleClient::new(fast(base)).unwrap();
        let results = client.fetch("Botulism", 3).unwrap();
        assert_eq!(results.len(), 1); // blank abstracts are dropped
        assert_eq!(results[0].external_id, "pubmed:101");
        assert!(results[0].snippet.contains("acetylcholine"));
        assert_eq!(hits.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn pubmed_style_zero_ids_is_empty() {
        let (base, hits) = serve(vec![(200, serde_json::json!({"ids": []}).to_string())]);
        let client = PubmedStyleClient::new(fast(base)).unwrap();
        assert!(client.fetch("nothing", 3).unwrap().is_empty());
        assert_eq!(hits.load(Ordering::SeqCst), 1); // no efetch round-trip
    }

    #[test]
    fn wiki_style_search_and_extract() {
        let (base, _) = serve(vec![
            (200, serde_json::json!({"titles": ["Levodopa"]}).to_string()),
            (200, serde_json::json!({"title": "Levodopa", "extract": "Precursor of dopamine."}).to_string()),
        ]);
        let client = WikiStyleClient::new(fast(base)).unwrap();
        let results = client.fetch("levodopa", 1).unwrap();
        assert_eq!(results.len(), 1);
        assert_eq!(results[0].external_id, "wiki:levodopa");
    }

    #[test]
    fn persistent_rate_limit_surfaces_as_transport_after_backoff() {
        let (base, hits) = serve(vec![(429, "{}".into())]);
        let client = PubmedStyleClient::new(fast(base)).unwrap();
        let err = client.fetch("x", 1).unwrap_err();
        assert!(matches!(err, SearchError::Transport(_)), "{err}");
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn malformed_reply_is_a_protocol_error() {
        let (base, _) = serve(vec![(200, serde_json::json!({"unexpected": true}).to_string())]);
        let client = PubmedStyleClient::new(fast(base)).unwrap();
        assert!(matches!(client.fetch("x", 1), Err(SearchError::Protocol(_))));
    }
}
