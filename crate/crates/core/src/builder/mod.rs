//! Graph construction orchestration.
//!
//! `build_for_query` grows the graph from one question: extract terms, fetch
//! descriptions from the configured source, summarize, judge every candidate
//! pair, and store only judgments at or above the quality threshold —
//! bidirectionally, through the graph's merge rules. `refresh` re-fetches
//! and re-judges a term set and its existing neighbors. Both work on a
//! private clone of the current snapshot and publish atomically, so QA
//! readers never observe a half-built graph. Failures of individual steps
//! degrade the build (and are reported in the delta) instead of aborting it.

use crate::agents::{AgentSuite, EntityContext};
use crate::canon::canonical_term;
use crate::confidence::RawConfidence;
use crate::graph::{EntityNode, GraphStore, KnowledgeGraph, NodeId, Provenance, UpsertOutcome};
use crate::search::{CachedSearcher, SearchResult};
use chrono::Utc;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}

/// Which pairs the relationship judge sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// All unordered pairs among the terms extracted for the current query.
    QueryLocal,
    /// All unordered pairs over the union of extracted terms and every node
    /// already in the graph. Quadratic; meant for small graphs.
    AllPairs,
}

#[derive(Debug, Clone)]
pub struct BuildConfig {
    pub quality_threshold: RawConfidence,
    pub pairing: Pairing,
    pub term_cap: usize,
    /// Search hits concatenated into one node description.
    pub top_n: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            quality_threshold: RawConfidence::new(8).expect("default threshold is in range"),
            pairing: Pairing::QueryLocal,
            term_cap: 8,
            top_n: 3,
        }
    }
}

impl BuildConfig {
    fn validate(&self) -> Result<(), BuildError> {
        if self.term_cap == 0 {
            return Err(BuildError::InvalidInput("term_cap must be at least 1".into()));
        }
        if self.top_n == 0 {
            return Err(BuildError::InvalidInput("top_n must be at least 1".into()));
        }
        Ok(())
    }
}

/// A judged pair that fell below the quality threshold. Kept in the delta so
/// threshold sweeps don't need to re-query agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedPair {
    pub src: String,
    pub dst: String,
    pub label: String,
    pub confidence: RawConfidence,
}

/// A step that failed without aborting the build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFailure {
    pub stage: String,
    pub subject: String,
    pub reason: String,
}

/// What one build or refresh changed. `rejected` and `failures` are
/// bookkeeping, not changes: `is_empty` looks at the change counters only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildDelta {
    pub nodes_added: usize,
    pub nodes_updated: usize,
    /// Directed edges stored (a retained pair adds 2: forward + reverse).
    pub edges_added: usize,
    /// Directed edges whose confidence was raised by a stronger judgment.
    pub edges_updated: usize,
    pub rejected: Vec<RejectedPair>,
    pub failures: Vec<StepFailure>,
}

impl BuildDelta {
    pub fn is_empty(&self) -> bool {
        self.nodes_added == 0 && self.nodes_updated == 0 && self.edges_added == 0 && self.edges_updated == 0
    }

    fn fail(&mut self, stage: &str, subject: &str, reason: impl std::fmt::Display) {
        self.failures.push(StepFailure { stage: stage.into(), subject: subject.into(), reason: reason.to_string() });
    }
}

pub struct Builder {
    agents: Arc<dyn AgentSuite>,
    searcher: Arc<CachedSearcher>,
    store: Arc<GraphStore>,
}

impl Builder {
    pub fn new(agents: Arc<dyn AgentSuite>, searcher: Arc<CachedSearcher>, store: Arc<GraphStore>) -> Self {
        Self { agents, searcher, store }
    }

    pub fn store(&self) -> &Arc<GraphStore> {
        &self.store
    }

    /// Grows the graph from one query and publishes the result atomically.
    pub fn build_for_query(&self, query: &str, config: &BuildConfig) -> Result<BuildDelta, BuildError> {
        if query.trim().is_empty() {
            return Err(BuildError::InvalidInput("query must be non-empty".into()));
        }
        config.validate()?;
        let _guard = self.store.builder_guard();
        let mut graph = self.store.snapshot().as_ref().clone();
        let mut delta = BuildDelta::default();

        let terms = match self.agents.extract_terms(query, config.term_cap) {
            Ok(terms) => terms,
            Err(e) => {
                delta.fail("extract-terms", query, e);
                return Ok(delta);
            }
        };
        let described = self.upsert_terms(&mut graph, &terms, config, &mut delta, false);
        let candidates = self.pairing_candidates(&graph, &described, config.pairing);
        self.judge_pairs(&mut graph, &candidates, config, &mut delta);

        graph.metadata.threshold = Some(config.quality_threshold);
        let source = self.searcher.source().to_string();
        if !graph.metadata.sources.contains(&source) {
            graph.metadata.sources.push(source);
        }
        graph.metadata.built_at = Some(Utc::now());
        self.store.publish(graph);
        Ok(delta)
    }

    /// Re-fetches descriptions for the given terms, re-judges relations among
    /// them and their existing neighbors, and publishes a new snapshot.
    pub fn refresh(&self, terms: &[String], config: &BuildConfig) -> Result<BuildDelta, BuildError> {
        if terms.is_empty() {
            return Err(BuildError::InvalidInput("refresh needs at least one term".into()));
        }
        config.validate()?;
        let _guard = self.store.builder_guard();
        let mut graph = self.store.snapshot().as_ref().clone();
        let mut delta = BuildDelta::default();

        // the refresh set: the given terms plus their current neighbors
        let mut target_terms: Vec<String> = Vec::new();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for term in terms {
            if seen.insert(canonical_term(term)) {
                target_terms.push(term.clone());
            }
            if let Ok(id) = NodeId::from_term(term) {
                if graph.contains_node(&id) {
                    for (_, neighbor) in graph.neighbors(&id, RawConfidence::MIN)? {
                        if seen.insert(neighbor.id.as_str().to_string()) {
                            target_terms.push(neighbor.term.clone());
                        }
                    }
                }
            }
        }

        let described = self.upsert_terms(&mut graph, &target_terms, config, &mut delta, true);
        self.judge_pairs(&mut graph, &described, config, &mut delta);
        graph.metadata.built_at = Some(Utc::now());
        self.store.publish(graph);
        Ok(delta)
    }

    /// Fetches descriptions and summaries for terms and upserts their nodes.
    /// Returns the contexts eligible for relationship inference (non-empty
    /// descriptions only).
    fn upsert_terms(
        &self,
        graph: &mut KnowledgeGraph,
        terms: &[String],
        config: &BuildConfig,
        delta: &mut BuildDelta,
        fresh: bool,
    ) -> Vec<(NodeId, EntityContext)> {
        let mut described = Vec::new();
        for term in terms {
            let results = if fresh {
                self.searcher.search_fresh(term, config.top_n)
            } else {
                self.searcher.search_descriptions(term, config.top_n)
            };
            let results: Vec<SearchResult> = match results {
                Ok(results) => results,
                Err(e) => {
                    delta.fail("search", term, e);
                    Vec::new()
                }
            };
            let description = results.iter().map(|r| r.snippet.as_str()).collect::<Vec<_>>().join("\n\n");

            let mut node = match EntityNode::new(term, &description) {
                Ok(node) => node,
                Err(e) => {
                    delta.fail("node", term, e);
                    continue;
                }
            };
            for result in &results {
                node.sources.push(Provenance {
                    source: result.source.to_string(),
                    query: result.query.clone(),
                    retrieved_at: result.retrieved_at,
                });
            }
            if !description.is_empty() {
                let snippets: Vec<String> = results.iter().map(|r| r.snippet.clone()).collect();
                match self.agents.summarize(&snippets) {
                    Ok(summary) => node = node.with_summary(&summary.text, summary.reliability),
                    Err(e) => delta.fail("summarize", term, e),
                }
            }
            match graph.upsert_node(node) {
                Ok(upsert) => {
                    match upsert.outcome {
                        UpsertOutcome::Created => delta.nodes_added += 1,
                        UpsertOutcome::Updated => delta.nodes_updated += 1,
                        UpsertOutcome::Unchanged => {}
                    }
                    let stored = graph.node(&upsert.id).expect("node was just upserted");
                    if !stored.description.is_empty() {
                        described.push((
                            upsert.id.clone(),
                            EntityContext::new(stored.term.clone(), stored.description.clone()),
                        ));
                    }
                }
                Err(e) => delta.fail("upsert-node", term, e),
            }
        }
        described
    }

    fn pairing_candidates(
        &self,
        graph: &KnowledgeGraph,
        described: &[(NodeId, EntityContext)],
        pairing: Pairing,
    ) -> Vec<(NodeId, EntityContext)> {
        match pairing {
            Pairing::QueryLocal => described.to_vec(),
            Pairing::AllPairs => {
                let mut candidates: Vec<(NodeId, EntityContext)> = described.to_vec();
                let seen: BTreeSet<&NodeId> = described.iter().map(|(id, _)| id).collect();
                for node in graph.nodes() {
                    if !seen.contains(&node.id) && !node.description.is_empty() {
                        candidates
                            .push((node.id.clone(), EntityContext::new(node.term.clone(), node.description.clone())));
                    }
                }
                candidates
            }
        }
    }

    /// Judges every unordered candidate pair once (ordered by node id) and
    /// stores pairs that meet the threshold.
    fn judge_pairs(
        &self,
        graph: &mut KnowledgeGraph,
        candidates: &[(NodeId, EntityContext)],
        config: &BuildConfig,
        delta: &mut BuildDelta,
    ) {
        let mut ordered: Vec<&(NodeId, EntityContext)> = candidates.iter().collect();
        ordered.sort_by(|a, b| a.0.cmp(&b.0));
        ordered.dedup_by(|a, b| a.0 == b.0);
        for i in 0..ordered.len() {
            for j in (i + 1)..ordered.len() {
                let (id_a, ctx_a) = ordered[i];
                let (id_b, ctx_b) = ordered[j];
                let judgment = match self.agents.infer_relationship(ctx_a, ctx_b) {
                    Ok(judgment) => judgment,
                    Err(e) => {
                        delta.fail("judge", &format!("{id_a} ~ {id_b}"), e);
                        continue;
                    }
                };
                if judgment.confidence < config.quality_threshold {
                    delta.rejected.push(RejectedPair {
                        src: id_a.as_str().to_string(),
                        dst: id_b.as_str().to_string(),
                        label: judgment.label,
                        confidence: judgment.confidence,
                    });
                    continue;
                }
                match graph.upsert_edge(id_a, id_b, &judgment.label, &judgment.annotation, judgment.confidence) {
                    Ok(upsert) => match upsert.outcome {
                        UpsertOutcome::Created => delta.edges_added += 2,
                        UpsertOutcome::Updated => delta.edges_updated += 2,
                        UpsertOutcome::Unchanged => {}
                    },
                    Err(e) => delta.fail("upsert-edge", &format!("{id_a} ~ {id_b}"), e),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{ScriptedMock, ScriptedMockFile};
    use crate::agents::{AgentError, AnswerOptions, EvidenceSnippet, ReasoningTrace, RelationshipJudgment, Summary, SynthesizedAnswer};

    fn raw(v: u8) -> RawConfidence {
        RawConfidence::new(v).unwrap()
    }

    fn cardio_mock_json() -> serde_json::Value {
        serde_json::json!({
            "term_lexicon": {
                "how are nitroglycerin, labetalol, propranolol and diltiazem used together?": [
                    "Nitroglycerin", "Labetalol", "Propranolol", "Diltiazem"
                ]
            },
            "relations": [
                {"a": "Nitroglycerin", "b": "Labetalol", "label": "co-administered", "annotation": "Used together for acute hypertension.", "confidence": 9},
                {"a": "Nitroglycerin", "b": "Propranolol", "label": "co-administered", "annotation": "Combined in cardiovascular care.", "confidence": 8},
                {"a": "Labetalol", "b": "Propranolol", "label": "same class", "annotation": "Both beta-blockers for hypertension.", "confidence": 10},
                {"a": "Diltiazem", "b": "Nitroglycerin", "label": "discussed together", "annotation": "Related in treatment discussions.", "confidence": 7},
                {"a": "Diltiazem", "b": "Labetalol", "label": "alternative", "annotation": "Different drug classes.", "confidence": 5},
                {"a": "Diltiazem", "b": "Propranolol", "label": "alternative", "annotation": "Rarely combined.", "confidence": 3}
            ]
        })
    }

    fn fixture_searcher(terms: &[(&str, &str)]) -> (tempfile::TempDir, Arc<CachedSearcher>) {
        let dir = tempfile::tempdir().unwrap();
        for (term, text) in terms {
            let name: String = canonical_term(term).chars().map(|c| if c.is_alphanumeric() { c } else { '_' }).collect();
            std::fs::write(dir.path().join(format!("{name}.txt")), text).unwrap();
        }
        let searcher = Arc::new(CachedSearcher::fixture(dir.path()));
        (dir, searcher)
    }

    fn cardio_mock() -> ScriptedMock {
        let script: ScriptedMockFile = serde_json::from_value(cardio_mock_json()).unwrap();
        ScriptedMock::from_file(script).unwrap()
    }

    fn cardio_fixture() -> (tempfile::TempDir, Builder) {
        let (dir, searcher) = fixture_searcher(&[
            ("Nitroglycerin", "Nitroglycerin is a vasodilator for angina and hypertensive emergencies."),
            ("Labetalol", "Labetalol is a combined alpha/beta blocker for hypertension."),
            ("Propranolol", "Propranolol is a non-selective beta blocker."),
            ("Diltiazem", "Diltiazem is a calcium channel blocker."),
        ]);
        let builder = Builder::new(Arc::new(cardio_mock()), searcher, Arc::new(GraphStore::default()));
        (dir, builder)
    }

    const CARDIO_QUERY: &str = "How are Nitroglycerin, Labetalol, Propranolol and Diltiazem used together?";

    #[test]
    fn threshold_eight_retains_exactly_the_strong_pairs() {
        let (_dir, builder) = cardio_fixture();
        let delta = builder.build_for_query(CARDIO_QUERY, &BuildConfig::default()).unwrap();
        assert_eq!(delta.nodes_added, 4);
        // 3 of C(4,2)=6 pairs are >= 8; each stores forward + reverse
        assert_eq!(delta.edges_added, 6);
        assert_eq!(delta.rejected.len(), 3);
        let graph = builder.store().snapshot();
        assert_eq!(graph.edge_count(), 6);
        assert_eq!(graph.edge_count() % 2, 0);

        // the fixture's expected neighbor set at the build threshold
        let nitro = NodeId::from_term("Nitroglycerin").unwrap();
        let hits = graph.neighbors(&nitro, raw(8)).unwrap();
        let names: Vec<&str> = hits.iter().map(|(_, n)| n.id.as_str()).collect();
        assert_eq!(names, vec!["labetalol", "propranolol"]);
    }

    #[test]
    fn threshold_ten_keeps_only_certain_pairs() {
        let (_dir, builder) = cardio_fixture();
        let config = BuildConfig { quality_threshold: raw(10), ..BuildConfig::default() };
        let delta = builder.build_for_query(CARDIO_QUERY, &config).unwrap();
        assert_eq!(delta.edges_added, 2); // only the confidence-10 pair
        assert_eq!(delta.rejected.len(), 5);
        let graph = builder.store().snapshot();
        assert_eq!(graph.edge_count(), 2);
        assert!(graph.edges().all(|e| e.confidence_raw == raw(10)));
    }

    #[test]
    fn rebuilding_the_same_query_changes_nothing() {
        let (_dir, builder) = cardio_fixture();
        builder.build_for_query(CARDIO_QUERY, &BuildConfig::default()).unwrap();
        let graph_before = builder.store().snapshot();
        let delta = builder.build_for_query(CARDIO_QUERY, &BuildConfig::default()).unwrap();
        assert!(delta.is_empty(), "{delta:?}");
        let graph_after = builder.store().snapshot();
        assert_eq!(graph_before.node_count(), graph_after.node_count());
        assert_eq!(graph_before.edge_count(), graph_after.edge_count());
    }

    #[test]
    fn nodes_carry_descriptions_summaries_and_provenance() {
        let (_dir, builder) = cardio_fixture();
        builder.build_for_query(CARDIO_QUERY, &BuildConfig::default()).unwrap();
        let graph = builder.store().snapshot();
        let node = graph.node(&NodeId::from_term("Labetalol").unwrap()).unwrap();
        assert!(node.description.contains("alpha/beta blocker"));
        assert!(node.summary.is_some());
        assert_eq!(node.sources.len(), 1);
        assert_eq!(node.sources[0].source, "fixture");
    }

    #[test]
    fn missing_fixture_degrades_without_aborting() {
        let (dir, searcher) = fixture_searcher(&[("Nitroglycerin", "A vasodilator.")]);
        let _keep = dir;
        let builder = Builder::new(Arc::new(cardio_mock()), searcher, Arc::new(GraphStore::default()));
        let delta = builder.build_for_query(CARDIO_QUERY, &BuildConfig::default()).unwrap();
        // all four nodes exist, three have empty descriptions and no pairs qualify
        assert_eq!(delta.nodes_added, 4);
        assert_eq!(delta.edges_added, 0);
        let graph = builder.store().snapshot();
        assert_eq!(graph.node(&NodeId::from_term("Labetalol").unwrap()).unwrap().description, "");
    }

    /// Agent that fails every relationship judgment, for degraded-path tests.
    struct FailingJudge(ScriptedMock);

    impl crate::agents::TermExtractor for FailingJudge {
        fn extract_terms(&self, query: &str, cap: usize) -> Result<Vec<String>, AgentError> {
            self.0.extract_terms(query, cap)
        }
    }
    impl crate::agents::RelationJudge for FailingJudge {
        fn infer_relationship(&self, _: &EntityContext, _: &EntityContext) -> Result<RelationshipJudgment, AgentError> {
            Err(AgentError::Transport("judge endpoint unreachable".into()))
        }
    }
    impl crate::agents::Summarizer for FailingJudge {
        fn summarize(&self, descriptions: &[String]) -> Result<Summary, AgentError> {
            self.0.summarize(descriptions)
        }
    }
    impl crate::agents::TraceGenerator for FailingJudge {
        fn generate_trace(&self, focus: &EntityContext, evidence: &[EvidenceSnippet]) -> Result<ReasoningTrace, AgentError> {
            self.0.generate_trace(focus, evidence)
        }
    }
    impl crate::agents::AnswerSynthesizer for FailingJudge {
        fn synthesize_answer(&self, traces: &[ReasoningTrace], options: &AnswerOptions) -> Result<SynthesizedAnswer, AgentError> {
            self.0.synthesize_answer(traces, options)
        }
    }

    #[test]
    fn failing_judge_records_failures_and_keeps_the_graph_valid() {
        let (_dir, searcher) = fixture_searcher(&[
            ("Nitroglycerin", "A vasodilator."),
            ("Labetalol", "A beta blocker."),
            ("Propranolol", "A beta blocker."),
            ("Diltiazem", "A calcium channel blocker."),
        ]);
        let builder = Builder::new(Arc::new(FailingJudge(cardio_mock())), searcher, Arc::new(GraphStore::default()));
        let delta = builder.build_for_query(CARDIO_QUERY, &BuildConfig::default()).unwrap();
        assert_eq!(delta.nodes_added, 4);
        assert_eq!(delta.edges_added, 0);
        assert_eq!(delta.failures.iter().filter(|f| f.stage == "judge").count(), 6);
        builder.store().snapshot().validate().unwrap();
    }

    #[test]
    fn refresh_on_unchanged_fixtures_is_a_zero_delta() {
        let (_dir, builder) = cardio_fixture();
        builder.build_for_query(CARDIO_QUERY, &BuildConfig::default()).unwrap();
        let delta = builder
            .refresh(&["Nitroglycerin".to_string()], &BuildConfig::default())
            .unwrap();
        assert!(delta.is_empty(), "{delta:?}");
    }

    #[test]
    fn refresh_picks_up_a_raised_confidence() {
        let (_dir, searcher) = fixture_searcher(&[
            ("Nitroglycerin", "A vasodilator."),
            ("Labetalol", "A beta blocker."),
            ("Propranolol", "A beta blocker."),
            ("Diltiazem", "A calcium channel blocker."),
        ]);
        let store = Arc::new(GraphStore::default());
        let weak = Builder::new(Arc::new(cardio_mock()), searcher.clone(), store.clone());
        weak.build_for_query(CARDIO_QUERY, &BuildConfig::default()).unwrap();
        assert_eq!(store.snapshot().edge_count(), 6);

        // same fixture, but the Diltiazem~Nitroglycerin judgment rose 7 -> 9
        let mut raised = cardio_mock_json();
        raised["relations"][3]["confidence"] = serde_json::json!(9);
        let raised_mock = ScriptedMock::from_file(serde_json::from_value(raised).unwrap()).unwrap();
        let refreshed = Builder::new(Arc::new(raised_mock), searcher, store.clone());
        let delta = refreshed
            .refresh(&["Diltiazem".to_string(), "Nitroglycerin".to_string()], &BuildConfig::default())
            .unwrap();
        assert_eq!(delta.edges_added, 2); // exactly forward + reverse
        assert_eq!(store.snapshot().edge_count(), 8);
    }

    #[test]
    fn all_pairs_judges_m_choose_2_on_an_empty_graph() {
        let (_dir, builder) = cardio_fixture();
        let config = BuildConfig { pairing: Pairing::AllPairs, ..BuildConfig::default() };
        let delta = builder.build_for_query(CARDIO_QUERY, &config).unwrap();
        // 4 terms on an empty graph: exactly 4*3/2 pairs judged
        let judged = delta.rejected.len() + delta.edges_added / 2;
        assert_eq!(judged, 6);
    }
}
