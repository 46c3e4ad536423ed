//! Line-delimited dataset loading.
//!
//! One JSON object per line with fields `question`, `options` (label ->
//! text), `answer` (the gold label), optional `id`, and optional
//! `meta.domain`. Malformed or invalid lines are skipped and reported, never
//! aborting the load.

use super::{QAItem, QaError};
use crate::agents::AnswerOptions;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Deserialize)]
struct DatasetLine {
    #[serde(default)]
    id: Option<String>,
    question: String,
    options: AnswerOptions,
    answer: String,
    #[serde(default)]
    meta: Option<Meta>,
}

#[derive(Debug, Deserialize)]
struct Meta {
    #[serde(default)]
    domain: Option<String>,
}

/// Parses dataset text. Returns the valid items plus one skip entry per bad
/// line.
pub fn parse_dataset(content: &str) -> (Vec<QAItem>, Vec<SkipEntry>) {
    let mut items = Vec::new();
    let mut skipped = Vec::new();
    for (number, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_id = format!("line-{}", number + 1);
        let parsed: DatasetLine = match serde_json::from_str(line) {
            Ok(parsed) => parsed,
            Err(e) => {
                skipped.push(SkipEntry { id: line_id, reason: format!("malformed record: {e}") });
                continue;
            }
        };
        let item = QAItem {
            id: parsed.id.unwrap_or_else(|| format!("item-{}", number + 1)),
            question: parsed.question,
            options: parsed.options,
            gold: parsed.answer,
            domain: parsed.meta.and_then(|m| m.domain),
        };
        match item.validate() {
            Ok(()) => items.push(item),
            Err(e) => skipped.push(SkipEntry { id: item.id, reason: e.to_string() }),
        }
    }
    (items, skipped)
}

pub fn load_dataset(path: &Path) -> Result<(Vec<QAItem>, Vec<SkipEntry>), QaError> {
    let content = std::fs::read_to_string(path)
        .map_err(|e| QaError::Configuration(format!("cannot read dataset {}: {e}", path.display())))?;
    Ok(parse_dataset(&content))
}
