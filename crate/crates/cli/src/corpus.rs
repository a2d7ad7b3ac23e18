//! Line-delimited JSON prompt corpora.

use std::collections::HashSet;
use std::path::Path;

use promptgate_core::SafetyCategory;
use serde::{Deserialize, Serialize};

/// Ground-truth label attached to a corpus record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Unsafe,
    Benign,
    Unknown,
}

/// One prompt of an evaluation corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<SafetyCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("failed to read corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A loaded corpus plus how many malformed lines were skipped (lenient mode).
#[derive(Debug)]
pub struct LoadedCorpus {
    pub records: Vec<CorpusRecord>,
    pub skipped: usize,
}

/// Load a JSONL corpus. In strict mode the first malformed line aborts with
/// its line number; in lenient mode malformed lines are skipped and counted.
pub fn load_corpus(path: impl AsRef<Path>, strict: bool) -> Result<LoadedCorpus, CorpusError> {
    let contents = std::fs::read_to_string(path)?;
    parse_corpus(&contents, strict)
}

pub fn parse_corpus(contents: &str, strict: bool) -> Result<LoadedCorpus, CorpusError> {
    let mut records = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    let mut skipped = 0usize;
    for (i, line) in contents.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Result<CorpusRecord, _> = serde_json::from_str(line);
        let record = match parsed {
            Ok(record) => record,
            Err(e) => {
                if strict {
                    return Err(CorpusError::Parse {
                        line: line_no,
                        message: e.to_string(),
                    });
                }
                skipped += 1;
                tracing::warn!("skipping malformed corpus line {line_no}: {e}");
                continue;
            }
        };
        if !seen_ids.insert(record.id.clone()) {
            if strict {
                return Err(CorpusError::Parse {
                    line: line_no,
                    message: format!("duplicate record id '{}'", record.id),
                });
            }
            skipped += 1;
            tracing::warn!("skipping duplicate corpus id '{}' at line {line_no}", record.id);
            continue;
        }
        records.push(record);
    }
    if records.is_empty() {
        tracing::warn!("corpus is empty");
    }
    Ok(LoadedCorpus { records, skipped })
}
