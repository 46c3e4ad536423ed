//! Deterministic scripted agent for offline runs and tests.
//!
//! Every behavior is table-driven: a query->terms lexicon, a term-pair
//! relation table, keyword-triggered summary and answer rules, and per-term
//! trace templates. Unknown inputs hit defined fallbacks (no terms, an
//! "unrelated" judgment at confidence 1, a template summary, an abstain
//! verdict), so the mock never fails and identical inputs always produce
//! identical outputs.

use super::{
    sanitize_terms, validate_extract_inputs, validate_judge_inputs, AgentError, AnswerOptions, EntityContext,
    EvidenceSnippet, ReasoningTrace, RelationshipJudgment, Summary, SynthesizedAnswer, TermExtractor, Verdict,
};
use super::{AnswerSynthesizer, RelationJudge, Summarizer, TraceGenerator};
use crate::canon::canonical_term;
use crate::confidence::RawConfidence;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

const FALLBACK_LABEL: &str = "unrelated";
const FALLBACK_SUMMARY_RELIABILITY: u8 = 5;
const SUMMARY_TEMPLATE_LIMIT: usize = 240;

/// On-disk script. All keys are canonicalized on load.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScriptedMockFile {
    /// query -> extracted terms
    #[serde(default)]
    pub term_lexicon: BTreeMap<String, Vec<String>>,
    /// unordered term pairs -> judgment
    #[serde(default)]
    pub relations: Vec<RelationRow>,
    /// keyword-triggered summaries, first match wins
    #[serde(default)]
    pub summaries: Vec<SummaryRule>,
    /// term -> scripted trace text
    #[serde(default)]
    pub trace_templates: BTreeMap<String, String>,
    /// keyword-triggered answers, first match wins
    #[serde(default)]
    pub answers: Vec<AnswerRule>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationRow {
    pub a: String,
    pub b: String,
    pub label: String,
    #[serde(default)]
    pub annotation: String,
    pub confidence: RawConfidence,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRule {
    pub keywords: Vec<String>,
    pub summary: String,
    pub reliability: RawConfidence,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnswerRule {
    pub keywords: Vec<String>,
    /// Matched against option texts (canonically), so scripts survive label
    /// shuffling.
    pub answer_text: String,
    pub confidence: f64,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Debug, Default)]
pub struct CallCounts {
    pub extract: usize,
    pub judge: usize,
    pub summarize: usize,
    pub trace: usize,
    pub synthesize: usize,
}

/// The scripted mock itself. Immutable after construction apart from call
/// counters, which exist so tests can assert which dependencies a pipeline
/// mode touched.
pub struct ScriptedMock {
    lexicon: BTreeMap<String, Vec<String>>,
    relations: BTreeMap<(String, String), RelationshipJudgment>,
    summaries: Vec<SummaryRule>,
    trace_templates: BTreeMap<String, String>,
    answers: Vec<AnswerRule>,
    extract_calls: AtomicUsize,
    judge_calls: AtomicUsize,
    summarize_calls: AtomicUsize,
    trace_calls: AtomicUsize,
    synthesize_calls: AtomicUsize,
}

impl ScriptedMock {
    pub fn from_file(script: ScriptedMockFile) -> Result<Self, AgentError> {
        let mut relations = BTreeMap::new();
        for row in script.relations {
            let key = (canonical_term(&row.a), canonical_term(&row.b));
            if key.0.is_empty() || key.1.is_empty() {
                return Err(AgentError::InvalidInput("relation rows need non-empty terms".into()));
            }
            relations.insert(
                key,
                RelationshipJudgment { label: row.label, annotation: row.annotation, confidence: row.confidence },
            );
        }
        for rule in script.answers.iter() {
            if rule.keywords.is_empty() {
                return Err(AgentError::InvalidInput("answer rules need at least one keyword".into()));
            }
            if !(0.0..=1.0).contains(&rule.confidence) {
                return Err(AgentError::InvalidInput("answer confidence must lie in [0, 1]".into()));
            }
        }
        for rule in script.summaries.iter() {
            if rule.keywords.is_empty() {
                return Err(AgentError::InvalidInput("summary rules need at least one keyword".into()));
            }
        }
        Ok(Self {
            lexicon: script
                .term_lexicon
                .into_iter()
                .map(|(query, terms)| (canonical_term(&query), terms))
                .collect(),
            relations,
            summaries: script.summaries,
            trace_templates: script
                .trace_templates
                .into_iter()
                .map(|(term, text)| (canonical_term(&term), text))
                .collect(),
            answers: script.answers,
            extract_calls: AtomicUsize::new(0),
            judge_calls: AtomicUsize::new(0),
            summarize_calls: AtomicUsize::new(0),
            trace_calls: AtomicUsize::new(0),
            synthesize_calls: AtomicUsize::new(0),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, AgentError> {
        let bytes = std::fs::read(path)
            .map_err(|e| AgentError::InvalidInput(format!("cannot read mock script {}: {e}", path.display())))?;
        let script: ScriptedMockFile = serde_json::from_slice(&bytes)
            .map_err(|e| AgentError::InvalidInput(format!("malformed mock script {}: {e}", path.display())))?;
        Self::from_file(script)
    }

    pub fn empty() -> Self {
        Self::from_file(ScriptedMockFile::default()).expect("empty script is valid")
    }

    pub fn call_counts(&self) -> CallCounts {
        CallCounts {
            extract: self.extract_calls.load(Ordering::Relaxed),
            judge: self.judge_calls.load(Ordering::Relaxed),
            summarize: self.summarize_calls.load(Ordering::Relaxed),
            trace: self.trace_calls.load(Ordering::Relaxed),
            synthesize: self.synthesize_calls.load(Ordering::Relaxed),
        }
    }

    /// The deterministic fallback summary: the first description, truncated
    /// on a character boundary.
    pub fn template_summary(descriptions: &[String]) -> String {
        let first = descriptions.first().map(String::as_str).unwrap_or_default();
        let mut end = first.len().min(SUMMARY_TEMPLATE_LIMIT);
        while end < first.len() && !first.is_char_boundary(end) {
            end += 1;
        }
        first[..end].trim().to_string()
    }
}

fn keywords_match(haystack: &str, keywords: &[String]) -> bool {
    keywords.iter().all(|k| haystack.contains(&canonical_term(k)))
}

impl TermExtractor for ScriptedMock {
    fn extract_terms(&self, query: &str, cap: usize) -> Result<Vec<String>, AgentError> {
        validate_extract_inputs(query, cap)?;
        self.extract_calls.fetch_add(1, Ordering::Relaxed);
        let terms = self.lexicon.get(&canonical_term(query)).cloned().unwrap_or_default();
        Ok(sanitize_terms(terms, cap))
    }
}

impl RelationJudge for ScriptedMock {
    fn infer_relationship(&self, a: &EntityContext, b: &EntityContext) -> Result<RelationshipJudgment, AgentError> {
        validate_judge_inputs(a, b)?;
        self.judge_calls.fetch_add(1, Ordering::Relaxed);
        let ka = canonical_term(&a.term);
        let kb = canonical_term(&b.term);
        let hit = self
            .relations
            .get(&(ka.clone(), kb.clone()))
            .or_else(|| self.relations.get(&(kb, ka)));
        Ok(hit.cloned().unwrap_or_else(|| RelationshipJudgment {
            label: FALLBACK_LABEL.into(),
            annotation: "no documented relationship".into(),
            confidence: RawConfidence::MIN,
        }))
    }
}

impl Summarizer for ScriptedMock {
    fn summarize(&self, descriptions: &[String]) -> Result<Summary, AgentError> {
        if descriptions.is_empty() {
            return Err(AgentError::InvalidInput("summarize needs at least one description".into()));
        }
        self.summarize_calls.fetch_add(1, Ordering::Relaxed);
        let haystack = canonical_term(&descriptions.join(" "));
        for rule in &self.summaries {
            if keywords_match(&haystack, &rule.keywords) {
                return Ok(Summary { text: rule.summary.clone(), reliability: rule.reliability });
            }
        }
        Ok(Summary {
            text: Self::template_summary(descriptions),
            reliability: RawConfidence::new(FALLBACK_SUMMARY_RELIABILITY).expect("fallback reliability is in range"),
        })
    }
}

impl TraceGenerator for ScriptedMock {
    fn generate_trace(&self, focus: &EntityContext, evidence: &[EvidenceSnippet]) -> Result<ReasoningTrace, AgentError> {
        self.trace_calls.fetch_add(1, Ordering::Relaxed);
        let text = match self.trace_templates.get(&canonical_term(&focus.term)) {
            Some(template) => template.clone(),
            None if evidence.is_empty() => format!("{}: {}", focus.term, focus.description),
            None => {
                let joined = evidence.iter().map(|e| e.text.as_str()).collect::<Vec<_>>().join(" | ");
                format!("{}: {} Connected evidence: {}", focus.term, focus.description, joined)
            }
        };
        Ok(ReasoningTrace {
            subject: focus.term.clone(),
            text,
            evidence_ids: evidence.iter().map(|e| e.id.clone()).collect(),
        })
    }
}

impl AnswerSynthesizer for ScriptedMock {
    fn synthesize_answer(&self, traces: &[ReasoningTrace], options: &AnswerOptions) -> Result<SynthesizedAnswer, AgentError> {
        if options.is_empty() {
            return Err(AgentError::InvalidInput("options must be non-empty".into()));
        }
        self.synthesize_calls.fetch_add(1, Ordering::Relaxed);
        if traces.is_empty() {
            return Ok(SynthesizedAnswer {
                verdict: Verdict::Abstain,
                confidence: 0.0,
                rationale: "no reasoning traces were produced".into(),
            });
        }
        let haystack = canonical_term(
            &traces.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" "),
        );
        for rule in &self.answers {
            if !keywords_match(&haystack, &rule.keywords) {
                continue;
            }
            let wanted = canonical_term(&rule.answer_text);
            if let Some((label, _)) = options.iter().find(|(_, text)| canonical_term(text) == wanted) {
                return Ok(SynthesizedAnswer {
                    verdict: Verdict::Label(label.clone()),
                    confidence: rule.confidence,
                    rationale: if rule.rationale.is_empty() {
                        format!("matched scripted evidence for '{}'", rule.answer_text)
                    } else {
                        rule.rationale.clone()
                    },
                });
            }
        }
        Ok(SynthesizedAnswer {
            verdict: Verdict::Abstain,
            confidence: 0.0,
            rationale: "no scripted answer matched the traces".into(),
        })
    }
}
