//! Contracts for every model-backed step of the pipeline.
//!
//! Five narrow traits cover term extraction, pairwise relationship judgment,
//! summarization, reasoning-trace generation, and answer synthesis; the
//! blanket [`AgentSuite`] bundles them for components that need all five.
//! Two implementations ship: [`ScriptedMock`] (deterministic, offline, driven
//! by fixture files) and [`HttpAgent`] (a chat-completion HTTP client with
//! strict structured-output validation at the boundary). Confidences outside
//! the 1-10 rubric are rejected as protocol errors, never clamped, so nothing
//! invalid can reach the graph.

mod http;
mod mock;

pub use http::{HttpAgent, ProviderConfig};
pub use mock::{ScriptedMock, ScriptedMockFile};

use crate::canon::canonical_term;
use crate::confidence::RawConfidence;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("protocol violation: {message}; raw output: {raw}")]
    Protocol { message: String, raw: String },
}

/// Answer options as shown to the synthesizer: label -> option text.
pub type AnswerOptions = BTreeMap<String, String>;

/// An entity as the relationship judge sees it: the term plus its retrieved
/// description.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityContext {
    pub term: String,
    pub description: String,
}

impl EntityContext {
    pub fn new(term: impl Into<String>, description: impl Into<String>) -> Self {
        Self { term: term.into(), description: description.into() }
    }
}

/// A judged relationship between two entities: category, free-text
/// justification, and a 1-10 reliability score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationshipJudgment {
    pub label: String,
    pub annotation: String,
    pub confidence: RawConfidence,
}

/// A condensed description with its reliability score.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub text: String,
    pub reliability: RawConfidence,
}

/// A snippet of evidence handed to the trace generator, tagged with the id
/// it will be audited under (node id or chunk id).
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceSnippet {
    pub id: String,
    pub text: String,
}

/// A per-entity reasoning trace plus the ids of the evidence it consumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub subject: String,
    pub text: String,
    pub evidence_ids: Vec<String>,
}

/// Outcome of answer synthesis. `Abstain` is a first-class verdict, distinct
/// from a wrong answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Label(String),
    Abstain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedAnswer {
    pub verdict: Verdict,
    pub confidence: f64,
    pub rationale: String,
}

pub trait TermExtractor: Send + Sync {
    /// Extracts up to `cap` distinct domain terms from a query, preserving
    /// the agent's output order.
    fn extract_terms(&self, query: &str, cap: usize) -> Result<Vec<String>, AgentError>;
}

pub trait RelationJudge: Send + Sync {
    /// Judges the relationship between two described entities on the 1-10
    /// rubric. Directional: swapping the arguments may yield a different
    /// label.
    fn infer_relationship(&self, a: &EntityContext, b: &EntityContext) -> Result<RelationshipJudgment, AgentError>;
}

pub trait Summarizer: Send + Sync {
    fn summarize(&self, descriptions: &[String]) -> Result<Summary, AgentError>;
}

pub trait TraceGenerator: Send + Sync {
    /// Produces a reasoning trace about `focus` grounded in the evidence
    /// snippets; the returned trace records the snippet ids for audit.
    fn generate_trace(&self, focus: &EntityContext, evidence: &[EvidenceSnippet]) -> Result<ReasoningTrace, AgentError>;
}

pub trait AnswerSynthesizer: Send + Sync {
    fn synthesize_answer(&self, traces: &[ReasoningTrace], options: &AnswerOptions) -> Result<SynthesizedAnswer, AgentError>;
}

/// Everything the builder and QA pipeline need from one provider.
pub trait AgentSuite: TermExtractor + RelationJudge + Summarizer + TraceGenerator + AnswerSynthesizer {}

impl<T: TermExtractor + RelationJudge + Summarizer + TraceGenerator + AnswerSynthesizer> AgentSuite for T {}

/// Shared post-processing for extracted terms: whitespace normalization,
/// dedup on the canonical form (first occurrence wins, original casing kept),
/// and the cap.
fn sanitize_terms(raw: impl IntoIterator<Item = String>, cap: usize) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    let mut terms = Vec::new();
    for term in raw {
        let canon = canonical_term(&term);
        if canon.is_empty() || !seen.insert(canon) {
            continue;
        }
        terms.push(term.split_whitespace().collect::<Vec<_>>().join(" "));
        if terms.len() == cap {
            break;
        }
    }
    terms
}

fn validate_extract_inputs(query: &str, cap: usize) -> Result<(), AgentError> {
    if query.trim().is_empty() {
        return Err(AgentError::InvalidInput("query must be non-empty".into()));
    }
    if cap == 0 {
        return Err(AgentError::InvalidInput("term cap must be at least 1".into()));
    }
    Ok(())
}

fn validate_judge_inputs(a: &EntityContext, b: &EntityContext) -> Result<(), AgentError> {
    if a.description.trim().is_empty() || b.description.trim().is_empty() {
        return Err(AgentError::InvalidInput("both descriptions must be non-empty".into()));
    }
    Ok(())
}
