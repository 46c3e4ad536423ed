//! Evaluation harness: accuracy, macro-F1 over option labels, the confusion
//! matrix with its abstain column, and per-domain breakdowns.
//!
//! Definitions pinned here: abstain counts as incorrect for accuracy and is
//! excluded from predicted-label F1 denominators (it is never a class); F1
//! is macro-averaged over the labels observed as gold or predicted, with 0
//! for degenerate precision/recall. Items run concurrently on a bounded worker
//! pool; the report is deterministic given deterministic dependencies.

use super::dataset::SkipEntry;
use super::{answer_amg_rag, answer_rag, answer_rag_cot, answer_rag_search, AnswerRecord, Mode, QAItem, QaError};
use crate::agents::{AgentSuite, Verdict};
use crate::graph::KnowledgeGraph;
use crate::ingest::ChunkRetriever;
use crate::search::CachedSearcher;
use crate::traversal::ExplorationConfig;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Everything a mode might need. Modes only touch their own dependencies:
/// the graph mode never reads the retriever and the retrieval modes never
/// read the graph.
pub struct EvalDeps<'a> {
    pub agents: &'a dyn AgentSuite,
    pub graph: Option<&'a KnowledgeGraph>,
    pub retriever: Option<&'a dyn ChunkRetriever>,
    pub searcher: Option<&'a CachedSearcher>,
    pub explore: ExplorationConfig<f64>,
    pub k: usize,
    pub m_external: usize,
}

/// Gold x predicted counts. Rows are gold labels; columns are the same
/// labels plus a trailing abstain column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn from_outcomes(outcomes: &[(String, Verdict)]) -> Self {
        let mut labels: BTreeSet<String> = BTreeSet::new();
        for (gold, predicted) in outcomes {
            labels.insert(gold.clone());
            if let Verdict::Label(label) = predicted {
                labels.insert(label.clone());
            }
        }
        let labels: Vec<String> = labels.into_iter().collect();
        let column_of: BTreeMap<&str, usize> =
            labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let mut matrix = vec![vec![0usize; labels.len() + 1]; labels.len()];
        for (gold, predicted) in outcomes {
            let row = column_of[gold.as_str()];
            let col = match predicted {
                Verdict::Label(label) => column_of[label.as_str()],
                Verdict::Abstain => labels.len(),
            };
            matrix[row][col] += 1;
        }
        Self { labels, matrix }
    }

    /// Per-gold-label totals (row sums).
    pub fn row_sums(&self) -> Vec<usize> {
        self.matrix.iter().map(|row| row.iter().sum()).collect()
    }

    /// Correct answers: the diagonal over the label columns.
    pub fn diagonal_total(&self) -> usize {
        self.matrix.iter().enumerate().map(|(i, row)| row[i]).sum()
    }

    pub fn total(&self) -> usize {
        self.matrix.iter().map(|row| row.iter().sum::<usize>()).sum()
    }

    pub fn abstain_total(&self) -> usize {
        self.matrix.iter().map(|row| row[self.labels.len()]).sum()
    }
}

/// Macro-averaged F1 treating option labels as classes. The classes are the
/// labels observed as gold or as a prediction — a label that never occurs
/// does not dilute the average. Abstains contribute false negatives for
/// their gold label but never false positives.
pub fn macro_f1(outcomes: &[(String, Verdict)]) -> f64 {
    let mut classes: BTreeSet<&str> = BTreeSet::new();
    for (gold, predicted) in outcomes {
        classes.insert(gold.as_str());
        if let Verdict::Label(label) = predicted {
            classes.insert(label.as_str());
        }
    }
    if classes.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for class in &classes {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for (gold, predicted) in outcomes {
            let predicted_class = matches!(predicted, Verdict::Label(l) if l == class);
            match (gold == class, predicted_class) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        sum += f1;
    }
    sum / classes.len() as f64
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DomainStats {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemOutcome {
    pub id: String,
    pub gold: String,
    pub predicted: Verdict,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: Mode,
    pub total: usize,
    pub correct: usize,
    pub abstained: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
    pub per_domain: BTreeMap<String, DomainStats>,
    pub items: Vec<ItemOutcome>,
    pub skipped: Vec<SkipEntry>,
}

fn answer_one(item: &QAItem, mode: Mode, deps: &EvalDeps<'_>) -> Result<AnswerRecord, QaError> {
    match mode {
        Mode::AmgRag => {
            let graph = deps.graph.ok_or(QaError::Configuration("amg-rag needs a graph".into()))?;
            answer_amg_rag(item, graph, &deps.explore, deps.agents)
        }
        Mode::Rag => {
            let retriever = deps.retriever.ok_or(QaError::Configuration("rag needs a vector index".into()))?;
            answer_rag(item, retriever, deps.k, deps.agents)
        }
        Mode::RagCot => {
            let retriever = deps.retriever.ok_or(QaError::Configuration("rag-cot needs a vector index".into()))?;
            answer_rag_cot(item, retriever, deps.k, deps.agents)
        }
        Mode::RagSearch => {
            let retriever =
                deps.retriever.ok_or(QaError::Configuration("rag-search needs a vector index".into()))?;
            let searcher = deps.searcher.ok_or(QaError::Configuration("rag-search needs a search source".into()))?;
            answer_rag_search(item, retriever, deps.k, searcher, deps.m_external, deps.agents)
        }
    }
}

/// Runs one mode over the dataset and aggregates the report. Per-item
/// failures become skip entries; they never abort the run.
pub fn evaluate(
    items: &[QAItem],
    mode: Mode,
    deps: &EvalDeps<'_>,
    pre_skipped: &[SkipEntry],
) -> Result<(EvalReport, Vec<AnswerRecord>), QaError> {
    if items.is_empty() {
        return Err(QaError::InvalidInput("dataset must be non-empty".into()));
    }
    let results: Vec<(usize, Result<AnswerRecord, QaError>)> = items
        .par_iter()
        .enumerate()
        .map(|(i, item)| (i, answer_one(item, mode, deps)))
        .collect();

    let mut records = Vec::new();
    let mut outcomes: Vec<(String, Verdict)> = Vec::new();
    let mut item_outcomes = Vec::new();
    let mut skipped: Vec<SkipEntry> = pre_skipped.to_vec();
    let mut per_domain: BTreeMap<String, DomainStats> = BTreeMap::new();

    for (i, result) in results {
        let item = &items[i];
        match result {
            Ok(record) => {
                let correct = matches!(&record.predicted, Verdict::Label(l) if *l == item.gold);
                outcomes.push((item.gold.clone(), record.predicted.clone()));
                item_outcomes.push(ItemOutcome {
                    id: item.id.clone(),
                    gold: item.gold.clone(),
                    predicted: record.predicted.clone(),
                    correct,
                });
                let domain = item.domain.clone().unwrap_or_else(|| "untagged".into());
                let stats = per_domain.entry(domain).or_default();
                stats.total += 1;
                if correct {
                    stats.correct += 1;
                }
                records.push(record);
            }
            Err(e) => skipped.push(SkipEntry { id: item.id.clone(), reason: e.to_string() }),
        }
    }
    for stats in per_domain.values_mut() {
        stats.accuracy = if stats.total == 0 { 0.0 } else { stats.correct as f64 / stats.total as f64 };
    }

    let confusion = ConfusionMatrix::from_outcomes(&outcomes);
    let total = outcomes.len();
    let correct = item_outcomes.iter().filter(|o| o.correct).count();
    let abstained = outcomes.iter().filter(|(_, p)| matches!(p, Verdict::Abstain)).count();
    let report = EvalReport {
        mode,
        total,
        correct,
        abstained,
        accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        macro_f1: macro_f1(&outcomes),
        confusion,
        per_domain,
        items: item_outcomes,
        skipped,
    };
    Ok((report, records))
}
