//! Lexicon loading and validation for the rule backend.
//!
//! The file format is line-delimited JSON. An optional first record
//! `{"version": "..."}` names the lexicon version; every other line is one
//! [`LexiconEntry`].

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::LexiconError;
use crate::types::SafetyCategory;

use super::matcher::{self, Token};

/// The four-point severity lattice the rule backend emits.
pub const SEVERITY_LATTICE: [f64; 4] = [0.0, 0.3, 0.6, 0.9];

/// Role of a lexicon entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryRole {
    StaticEntity,
    Action,
    EscalationPair,
    StyleCue,
}

/// One rule-backend judgment unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub pattern: String,
    pub category: SafetyCategory,
    pub role: EntryRole,
    pub severity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safe_substitute: Option<String>,
}

#[derive(Debug, Deserialize)]
struct VersionHeader {
    version: String,
}

/// A parsed escalation pair: earlier stage words, later stage words.
#[derive(Debug, Clone)]
pub struct EscalationPair {
    pub earlier: Vec<String>,
    pub later: Vec<String>,
    pub category: SafetyCategory,
    pub severity: f64,
    pub chain_id: String,
}

/// One stage of an escalation chain, in chain order.
#[derive(Debug, Clone)]
pub struct ChainStage {
    pub entry_index: usize,
    pub stage_index: usize,
    pub words: Vec<String>,
}

/// Validated, immutable lexicon shared across threads.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub entries: Vec<LexiconEntry>,
    pub version: String,
    chains: BTreeMap<String, Vec<ChainStage>>,
    pairs: Vec<EscalationPair>,
}

impl Lexicon {
    /// Load and validate a lexicon from a line-delimited JSON file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let content = std::fs::read_to_string(path)?;
        Self::parse(&content)
    }

    /// The default lexicon shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(include_str!("../../fixtures/default_lexicon.jsonl"))
            .expect("bundled lexicon must be valid")
    }

    /// Parse and validate lexicon content. Malformed or duplicate entries are
    /// hard errors carrying line numbers.
    pub fn parse(content: &str) -> Result<Self, LexiconError> {
        let mut entries: Vec<LexiconEntry> = Vec::new();
        let mut entry_lines: Vec<usize> = Vec::new();
        let mut version = String::from("unversioned");

        for (lineno, line) in content.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if entries.is_empty() && lineno == 1 {
                if let Ok(header) = serde_json::from_str::<VersionHeader>(line) {
                    version = header.version;
                    continue;
                }
            }
            let entry: LexiconEntry =
                serde_json::from_str(line).map_err(|e| LexiconError::Parse {
                    line: lineno,
                    message: e.to_string(),
                })?;
            validate_entry(&entry, lineno)?;
            entries.push(entry);
            entry_lines.push(lineno);
        }

        // Duplicate (pattern, role) detection, naming both lines.
        let mut seen: HashMap<(String, EntryRole), usize> = HashMap::new();
        for (i, entry) in entries.iter().enumerate() {
            let key = (matcher::pattern_words(&entry.pattern).join(" "), entry.role);
            if let Some(prev) = seen.insert(key, entry_lines[i]) {
                return Err(LexiconError::Validation(format!(
                    "duplicate (pattern, role) entry '{}' at lines {} and {}",
                    entry.pattern, prev, entry_lines[i]
                )));
            }
        }

        let chains = build_chains(&entries)?;
        let pairs = build_pairs(&entries, &chains)?;

        Ok(Self {
            entries,
            version,
            chains,
            pairs,
        })
    }

    /// An empty lexicon: the backend then never intervenes.
    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
            version: "empty".into(),
            chains: BTreeMap::new(),
            pairs: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn chains(&self) -> &BTreeMap<String, Vec<ChainStage>> {
        &self.chains
    }

    pub fn pairs(&self) -> &[EscalationPair] {
        &self.pairs
    }

    /// Entries of the given roles whose pattern occurs in the tokenized text.
    pub fn matches_in<'a>(
        &'a self,
        tokens: &[Token],
        roles: &[EntryRole],
    ) -> Vec<&'a LexiconEntry> {
        self.entries
            .iter()
            .filter(|e| roles.contains(&e.role))
            .filter(|e| {
                matcher::find_phrase(tokens, &matcher::pattern_words(&e.pattern)).is_some()
            })
            .collect()
    }

    /// For each chain, the most advanced stage whose pattern occurs in the
    /// text. Returns (chain_id, stage).
    pub fn chain_matches(&self, tokens: &[Token]) -> Vec<(&str, &ChainStage)> {
        let mut out = Vec::new();
        for (chain_id, stages) in &self.chains {
            if let Some(stage) = stages
                .iter()
                .rev()
                .find(|s| matcher::find_phrase(tokens, &s.words).is_some())
            {
                out.push((chain_id.as_str(), stage));
            }
        }
        out
    }

    /// Stage entry by chain and position within the chain's stage list.
    pub fn stage_entry(&self, chain_id: &str, position: usize) -> Option<&LexiconEntry> {
        self.chains
            .get(chain_id)
            .and_then(|stages| stages.get(position))
            .map(|s| &self.entries[s.entry_index])
    }
}

fn validate_entry(entry: &LexiconEntry, line: usize) -> Result<(), LexiconError> {
    if matcher::pattern_words(&entry.pattern).is_empty() {
        return Err(LexiconError::Validation(format!(
            "empty pattern at line {line}"
        )));
    }
    if !SEVERITY_LATTICE.contains(&entry.severity) {
        return Err(LexiconError::Validation(format!(
            "severity {} at line {line} is not in the {{0.0, 0.3, 0.6, 0.9}} lattice",
            entry.severity
        )));
    }
    if entry.role == EntryRole::EscalationPair {
        if entry.chain_id.is_none() {
            return Err(LexiconError::Validation(format!(
                "escalation_pair at line {line} is missing chain_id"
            )));
        }
        if !entry.pattern.contains("->") {
            return Err(LexiconError::Validation(format!(
                "escalation_pair pattern at line {line} must be '<earlier> -> <later>'"
            )));
        }
    }
    if entry.stage_index.is_some() && entry.chain_id.is_none() {
        return Err(LexiconError::Validation(format!(
            "stage_index without chain_id at line {line}"
        )));
    }
    Ok(())
}

fn build_chains(
    entries: &[LexiconEntry],
) -> Result<BTreeMap<String, Vec<ChainStage>>, LexiconError> {
    let mut chains: BTreeMap<String, Vec<ChainStage>> = BTreeMap::new();
    for (i, entry) in entries.iter().enumerate() {
        if entry.role != EntryRole::Action {
            continue;
        }
        let (Some(chain_id), Some(stage_index)) = (&entry.chain_id, entry.stage_index) else {
            continue;
        };
        chains.entry(chain_id.clone()).or_default().push(ChainStage {
            entry_index: i,
            stage_index,
            words: matcher::pattern_words(&entry.pattern),
        });
    }
    for (chain_id, stages) in &mut chains {
        stages.sort_by_key(|s| s.stage_index);
        let strictly_ordered = stages.windows(2).all(|w| w[0].stage_index < w[1].stage_index);
        if !strictly_ordered {
            return Err(LexiconError::Validation(format!(
                "chain '{chain_id}' stages are not strictly ordered"
            )));
        }
    }
    Ok(chains)
}

fn build_pairs(
    entries: &[LexiconEntry],
    chains: &BTreeMap<String, Vec<ChainStage>>,
) -> Result<Vec<EscalationPair>, LexiconError> {
    let mut pairs = Vec::new();
    for entry in entries {
        if entry.role != EntryRole::EscalationPair {
            continue;
        }
        let chain_id = entry.chain_id.clone().expect("validated above");
        let (earlier_raw, later_raw) = entry
            .pattern
            .split_once("->")
            .expect("validated above");
        let earlier = matcher::pattern_words(earlier_raw);
        let later = matcher::pattern_words(later_raw);
        let stages = chains.get(&chain_id).ok_or_else(|| {
            LexiconError::Validation(format!(
                "escalation_pair '{}' references unknown chain '{chain_id}'",
                entry.pattern
            ))
        })?;
        let pos_of = |words: &[String]| stages.iter().position(|s| s.words == words);
        match (pos_of(&earlier), pos_of(&later)) {
            (Some(a), Some(b)) if a < b => {}
            _ => {
                return Err(LexiconError::Validation(format!(
                    "escalation_pair '{}' must reference two stages of chain '{chain_id}' in order",
                    entry.pattern
                )))
            }
        }
        pairs.push(EscalationPair {
            earlier,
            later,
            category: entry.category,
            severity: entry.severity,
            chain_id,
        });
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry_line(pattern: &str, role: &str, severity: f64) -> String {
        format!(
            r#"{{"pattern":"{pattern}","category":"Violence","role":"{role}","severity":{severity}}}"#
        )
    }

    #[test]
    fn bundled_lexicon_is_valid_and_has_chains() {
        let lex = Lexicon::bundled();
        assert!(!lex.is_empty());
        // at least one chain per conflict/gore family
        assert!(lex.chains().keys().any(|c| c.contains("conflict")));
        assert!(lex.chains().keys().any(|c| c.contains("gore")));
    }

    #[test]
    fn empty_file_is_a_legal_empty_lexicon() {
        let lex = Lexicon::parse("").unwrap();
        assert!(lex.is_empty());
    }

    #[test]
    fn duplicate_pattern_role_names_both_lines() {
        let content = format!(
            "{}\n{}\n",
            entry_line("knife", "static_entity", 0.9),
            entry_line("knife", "static_entity", 0.6)
        );
        let err = Lexicon::parse(&content).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("lines 1 and 2"), "{msg}");
    }

    #[test]
    fn severity_must_be_on_the_lattice() {
        let err = Lexicon::parse(&entry_line("knife", "static_entity", 0.5)).unwrap_err();
        assert!(err.to_string().contains("lattice"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let content = format!("{}\nnot json\n", entry_line("knife", "static_entity", 0.9));
        match Lexicon::parse(&content).unwrap_err() {
            LexiconError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn pair_must_reference_chain_stages_in_order() {
        let content = r#"{"pattern":"a","category":"Violence","role":"action","severity":0.0,"chain_id":"c","stage_index":0}
{"pattern":"b","category":"Violence","role":"action","severity":0.3,"chain_id":"c","stage_index":1}
{"pattern":"b -> a","category":"Violence","role":"escalation_pair","severity":0.6,"chain_id":"c"}"#;
        assert!(Lexicon::parse(content).is_err());
        let ok = content.replace("b -> a", "a -> b");
        assert!(Lexicon::parse(&ok).is_ok());
    }

    #[test]
    fn version_header_is_recognized() {
        let content = format!(
            "{}\n{}\n",
            r#"{"version":"test-1"}"#,
            entry_line("knife", "static_entity", 0.9)
        );
        let lex = Lexicon::parse(&content).unwrap();
        assert_eq!(lex.version, "test-1");
        assert_eq!(lex.entries.len(), 1);
    }
}
