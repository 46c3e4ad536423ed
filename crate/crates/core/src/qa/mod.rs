//! Graph-guided question answering plus the retrieval baselines.
//!
//! `answer_amg_rag` runs the full graph path: extract terms, explore the
//! graph per term under confidence propagation, generate one reasoning trace
//! per term, synthesize the answer from the traces. The baselines skip the
//! graph entirely: `answer_rag` passes retrieved chunks straight to
//! synthesis, `answer_rag_cot` inserts one intermediate reasoning step, and
//! `answer_rag_search` unions retrieved chunks with external search
//! snippets. Mode isolation is structural: the graph mode takes no
//! retriever, the retrieval modes take no graph.
//!
//! Every step failure degrades the answer (recorded on the record) rather
//! than aborting; an answer without usable evidence is an abstain, tracked
//! separately from wrong answers.

mod dataset;
mod eval;

pub use dataset::{load_dataset, parse_dataset};
pub use eval::{evaluate, macro_f1, ConfusionMatrix, DomainStats, EvalDeps, EvalReport, ItemOutcome};

use crate::agents::{
    AgentError, AgentSuite, AnswerOptions, EntityContext, EvidenceSnippet, ReasoningTrace, SynthesizedAnswer, Verdict,
};
use crate::graph::KnowledgeGraph;
use crate::ingest::ChunkRetriever;
use crate::search::CachedSearcher;
use crate::traversal::{explore, EvidenceItem, ExplorationConfig};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::time::{Duration, Instant};

#[derive(Debug, thiserror::Error)]
pub enum QaError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error(transparent)]
    Agent(#[from] crate::agents::AgentError),
    #[error(transparent)]
    Traversal(#[from] crate::traversal::TraversalError),
    #[error(transparent)]
    Ingest(#[from] crate::ingest::IngestError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}

/// Pipeline modes. The strings are the CLI/report names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    AmgRag,
    Rag,
    RagCot,
    RagSearch,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AmgRag => f.write_str("amg-rag"),
            Self::Rag => f.write_str("rag"),
            Self::RagCot => f.write_str("rag-cot"),
            Self::RagSearch => f.write_str("rag-search"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = QaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "amg-rag" => Ok(Self::AmgRag),
            "rag" => Ok(Self::Rag),
            "rag-cot" => Ok(Self::RagCot),
            "rag-search" => Ok(Self::RagSearch),
            other => Err(QaError::InvalidInput(format!(
                "unknown mode '{other}' (expected amg-rag|rag|rag-cot|rag-search)"
            ))),
        }
    }
}

/// One multiple-choice item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAItem {
    pub id: String,
    pub question: String,
    pub options: AnswerOptions,
    pub gold: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

impl QAItem {
    pub fn validate(&self) -> Result<(), QaError> {
        if self.question.trim().is_empty() {
            return Err(QaError::InvalidInput(format!("item '{}' has an empty question", self.id)));
        }
        if self.options.len() < 2 {
            return Err(QaError::InvalidInput(format!("item '{}' needs at least 2 options", self.id)));
        }
        if !self.options.contains_key(&self.gold) {
            return Err(QaError::InvalidInput(format!(
                "item '{}': gold label '{}' is not among the options",
                self.id, self.gold
            )));
        }
        Ok(())
    }
}

/// What an answer used, by id, so audits can resolve every piece of
/// evidence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvidenceAudit {
    pub graph_nodes: Vec<String>,
    pub chunks: Vec<(String, u32)>,
    pub search_results: Vec<String>,
}

/// Outcome of answering one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub item_id: String,
    pub mode: Mode,
    pub predicted: Verdict,
    pub confidence: f64,
    pub rationale: String,
    pub traces: Vec<ReasoningTrace>,
    pub evidence: EvidenceAudit,
    /// Steps that failed and degraded this answer.
    pub degraded: Vec<String>,
    pub latency: Duration,
}

impl AnswerRecord {
    fn start(item: &QAItem, mode: Mode) -> (Self, Instant) {
        (
            Self {
                item_id: item.id.clone(),
                mode,
                predicted: Verdict::Abstain,
                confidence: 0.0,
                rationale: String::new(),
                traces: Vec::new(),
                evidence: EvidenceAudit::default(),
                degraded: Vec::new(),
                latency: Duration::ZERO,
            },
            Instant::now(),
        )
    }

    fn finish(mut self, started: Instant) -> Self {
        self.latency = started.elapsed();
        self
    }

    fn apply_synthesis(&mut self, outcome: Result<SynthesizedAnswer, AgentError>) {
        match outcome {
            Ok(answer) => {
                self.predicted = answer.verdict;
                self.confidence = answer.confidence;
                self.rationale = answer.rationale;
            }
            Err(e) => {
                // a label outside the options (or any protocol/transport
                // failure) maps to an abstain, recorded distinctly
                self.degraded.push(format!("synthesize: {e}"));
                self.predicted = Verdict::Abstain;
                self.confidence = 0.0;
            }
        }
    }
}

/// Full graph path: terms -> per-term exploration -> per-term traces ->
/// synthesis.
pub fn answer_amg_rag(
    item: &QAItem,
    graph: &KnowledgeGraph,
    config: &ExplorationConfig<f64>,
    agents: &dyn AgentSuite,
) -> Result<AnswerRecord, QaError> {
    item.validate()?;
    let (mut record, started) = AnswerRecord::start(item, Mode::AmgRag);

    let terms = match agents.extract_terms(&item.question, config.max_docs) {
        Ok(terms) => terms,
        Err(e) => {
            record.degraded.push(format!("extract-terms: {e}"));
            Vec::new()
        }
    };

    let mut audited: BTreeSet<String> = BTreeSet::new();
    for term in &terms {
        let Ok(seed) = crate::graph::NodeId::from_term(term) else { continue };
        if !graph.contains_node(&seed) {
            continue;
        }
        let evidence = explore(graph, std::slice::from_ref(&seed), config)?;
        let focus_node = graph.node(&seed).expect("seed exists");
        let focus = EntityContext::new(
            focus_node.term.clone(),
            focus_node.summary.clone().unwrap_or_else(|| focus_node.description.clone()),
        );
        let snippets = evidence_snippets(graph, &evidence, &seed);
        for item in &evidence {
            audited.insert(item.node.as_str().to_string());
        }
        match agents.generate_trace(&focus, &snippets) {
            Ok(trace) => record.traces.push(trace),
            Err(e) => record.degraded.push(format!("trace[{term}]: {e}")),
        }
    }
    record.evidence.graph_nodes = audited.into_iter().collect();

    if record.traces.is_empty() {
        record.rationale = "no graph evidence matched the question terms".into();
        return Ok(record.finish(started));
    }
    let outcome = agents.synthesize_answer(&record.traces, &item.options);
    record.apply_synthesis(outcome);
    Ok(record.finish(started))
}

fn evidence_snippets(
    graph: &KnowledgeGraph,
    evidence: &[EvidenceItem<f64>],
    seed: &crate::graph::NodeId,
) -> Vec<EvidenceSnippet> {
    evidence
        .iter()
        .filter(|item| &item.node != seed)
        .filter_map(|item| {
            graph.node(&item.node).map(|node| EvidenceSnippet {
                id: node.id.as_str().to_string(),
                text: node.summary.clone().unwrap_or_else(|| node.description.clone()),
            })
        })
        .collect()
}

/// Plain retrieval baseline: top-k chunks concatenated and synthesized.
pub fn answer_rag(
    item: &QAItem,
    retriever: &dyn ChunkRetriever,
    k: usize,
    agents: &dyn AgentSuite,
) -> Result<AnswerRecord, QaError> {
    item.validate()?;
    if k == 0 {
        return Err(QaError::InvalidInput("k must be at least 1".into()));
    }
    if retriever.is_empty() {
        return Err(QaError::Configuration("the vector index is empty".into()));
    }
    let (mut record, started) = AnswerRecord::start(item, Mode::Rag);
    let context = retrieve_context(item, retriever, k, &mut record)?;
    let outcome = agents.synthesize_answer(&context, &item.options);
    record.apply_synthesis(outcome);
    Ok(record.finish(started))
}

/// Retrieval plus one intermediate reasoning step; the trace is stored on
/// the record.
pub fn answer_rag_cot(
    item: &QAItem,
    retriever: &dyn ChunkRetriever,
    k: usize,
    agents: &dyn AgentSuite,
) -> Result<AnswerRecord, QaError> {
    item.validate()?;
    if k == 0 {
        return Err(QaError::InvalidInput("k must be at least 1".into()));
    }
    if retriever.is_empty() {
        return Err(QaError::Configuration("the vector index is empty".into()));
    }
    let (mut record, started) = AnswerRecord::start(item, Mode::RagCot);
    let hits = retriever.query_topk(&item.question, k)?;
    let snippets: Vec<EvidenceSnippet> = hits
        .iter()
        .map(|(chunk, _)| EvidenceSnippet {
            id: format!("{}#{}", chunk.doc_id, chunk.chunk_id),
            text: chunk.text.clone(),
        })
        .collect();
    record.evidence.chunks = hits.iter().map(|(c, _)| (c.doc_id.clone(), c.chunk_id)).collect();
    let focus = EntityContext::new(format!("question {}", item.id), item.question.clone());
    match agents.generate_trace(&focus, &snippets) {
        Ok(trace) => {
            record.traces.push(trace);
            let outcome = agents.synthesize_answer(&record.traces, &item.options);
            record.apply_synthesis(outcome);
        }
        Err(e) => {
            record.degraded.push(format!("trace: {e}"));
            // degraded reasoning step: abstain rather than answer unguarded
        }
    }
    Ok(record.finish(started))
}

/// Retrieval unioned with external search snippets; a search failure
/// degrades to plain retrieval with a flag.
pub fn answer_rag_search(
    item: &QAItem,
    retriever: &dyn ChunkRetriever,
    k: usize,
    searcher: &CachedSearcher,
    m_external: usize,
    agents: &dyn AgentSuite,
) -> Result<AnswerRecord, QaError> {
    item.validate()?;
    if k == 0 {
        return Err(QaError::InvalidInput("k must be at least 1".into()));
    }
    if retriever.is_empty() {
        return Err(QaError::Configuration("the vector index is empty".into()));
    }
    let (mut record, started) = AnswerRecord::start(item, Mode::RagSearch);
    let mut context = retrieve_context(item, retriever, k, &mut record)?;
    if m_external > 0 {
        match searcher.search_descriptions(&item.question, m_external) {
            Ok(results) => {
                for result in results {
                    record.evidence.search_results.push(result.external_id.clone());
                    context[0].text.push_str("\n\n");
                    context[0].text.push_str(&result.snippet);
                    context[0].evidence_ids.push(result.external_id);
                }
            }
            Err(e) => record.degraded.push(format!("search: {e}")),
        }
    }
    let outcome = agents.synthesize_answer(&context, &item.options);
    record.apply_synthesis(outcome);
    Ok(record.finish(started))
}

/// Top-k chunks as a single synthesis context; not recorded as a reasoning
/// trace on the answer record.
fn retrieve_context(
    item: &QAItem,
    retriever: &dyn ChunkRetriever,
    k: usize,
    record: &mut AnswerRecord,
) -> Result<Vec<ReasoningTrace>, QaError> {
    let hits = retriever.query_topk(&item.question, k)?;
    record.evidence.chunks = hits.iter().map(|(c, _)| (c.doc_id.clone(), c.chunk_id)).collect();
    let text = hits.iter().map(|(c, _)| c.text.as_str()).collect::<Vec<_>>().join("\n\n");
    Ok(vec![ReasoningTrace {
        subject: format!("retrieved context for {}", item.id),
        text,
        evidence_ids: hits.iter().map(|(c, _)| format!("{}#{}", c.doc_id, c.chunk_id)).collect(),
    }])
}
