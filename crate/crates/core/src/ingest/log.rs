//! Line-oriented processed-file log.
//!
//! One JSON object per line; the last line for a path wins on load. A file
//! whose content hash is unchanged and whose status is `done` is never
//! reprocessed.

use super::IngestError;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "status")]
pub enum FileStatus {
    Done,
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub path: String,
    #[serde(flatten)]
    pub status: FileStatus,
    pub content_hash: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct IngestLog {
    entries: BTreeMap<String, LogEntry>,
}

impl IngestLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        if !path.exists() {
            return Ok(Self::new());
        }
        let content = std::fs::read_to_string(path)
            .map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
        let mut entries = BTreeMap::new();
        for (number, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: LogEntry = serde_json::from_str(line)
                .map_err(|e| IngestError::Parse(format!("{} line {}: {e}", path.display(), number + 1)))?;
            entries.insert(entry.path.clone(), entry);
        }
        Ok(Self { entries })
    }

    pub fn record(&mut self, entry: LogEntry) {
        self.entries.insert(entry.path.clone(), entry);
    }

    pub fn get(&self, path: &str) -> Option<&LogEntry> {
        self.entries.get(path)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True unless the file was already processed successfully with the same
    /// content hash.
    pub fn needs_processing(&self, path: &str, content_hash: &str) -> bool {
        match self.entries.get(path) {
            Some(entry) => entry.content_hash != content_hash || !matches!(entry.status, FileStatus::Done),
            None => true,
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = &LogEntry> {
        self.entries.values()
    }

    /// Writes the whole log as one JSON object per line.
    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        let mut out = String::new();
        for entry in self.entries.values() {
            let line = serde_json::to_string(entry).map_err(|e| IngestError::Parse(e.to_string()))?;
            out.push_str(&line);
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
    }

    /// Appends an entry to the on-disk log.
    pub fn append_to(path: &Path, entry: &LogEntry) -> Result<(), IngestError> {
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
        let line = serde_json::to_string(entry).map_err(|e| IngestError::Parse(e.to_string()))?;
        writeln!(file, "{line}").map_err(|source| IngestError::Io { path: path.display().to_string(), source })
    }
}
