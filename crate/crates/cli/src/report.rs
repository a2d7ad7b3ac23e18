//! Evaluation reports: canonical JSON and a per-category markdown table.

use std::collections::BTreeMap;

use promptgate_core::{PipelineConfig, SafetyCategory};
use serde::{Deserialize, Serialize};

use crate::corpus::Label;

/// Verdict tallies for one slice of a corpus.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub pass: usize,
    pub rewritten: usize,
    pub rejected: usize,
    pub error: usize,
}

impl VerdictCounts {
    pub fn total(&self) -> usize {
        self.pass + self.rewritten + self.rejected + self.error
    }

    /// Fraction of prompts that did not pass through untouched.
    pub fn intervention_rate(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            (self.rewritten + self.rejected + self.error) as f64 / self.total() as f64
        }
    }
}

/// Outcome of mediating one corpus record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptOutcome {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<SafetyCategory>,
    /// pass | rewritten | rejected | error
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<usize>,
    /// Fraction of original context tokens preserved verbatim in the output;
    /// only defined when an output exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_retention: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Aggregated mediation statistics for one corpus at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub backend: String,
    pub config: PipelineConfig,
    pub corpus_size: usize,
    pub overall: VerdictCounts,
    pub intervention_rate: f64,
    /// Pass rate over benign-labeled records; absent when there are none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benign_pass_rate: Option<f64>,
    pub per_category: BTreeMap<SafetyCategory, VerdictCounts>,
    /// Trigger anchor index -> occurrence count.
    pub trigger_histogram: BTreeMap<usize, usize>,
    pub mean_context_retention: f64,
    pub outcomes: Vec<PromptOutcome>,
    /// Wall-clock total; excluded from the canonical form.
    pub wall_clock_ms: u64,
}

impl EvalReport {
    /// Deterministic JSON: identical inputs produce byte-identical output.
    /// The wall-clock field is zeroed because it is the only
    /// non-reproducible value.
    pub fn canonical_json(&self) -> String {
        let mut canonical = self.clone();
        canonical.wall_clock_ms = 0;
        let mut out = serde_json::to_string_pretty(&canonical).expect("report serializes");
        out.push('\n');
        out
    }

    /// Category × verdict table, one row per category present in the corpus
    /// plus an Avg row; categories absent from the corpus are noted below
    /// the table.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# Mediation report (backend: {}, tau: {}, horizon: {})\n\n",
            self.backend, self.config.tau, self.config.horizon
        ));
        out.push_str("| Category | Prompts | Pass | Rewritten | Rejected | Error | Intervention |\n");
        out.push_str("|---|---:|---:|---:|---:|---:|---:|\n");
        let mut absent = Vec::new();
        for category in SafetyCategory::ALL {
            match self.per_category.get(&category) {
                Some(counts) => {
                    out.push_str(&format!(
                        "| {} | {} | {} | {} | {} | {} | {:.2} |\n",
                        category,
                        counts.total(),
                        counts.pass,
                        counts.rewritten,
                        counts.rejected,
                        counts.error,
                        counts.intervention_rate(),
                    ));
                }
                None => absent.push(category.name()),
            }
        }
        let sum: VerdictCounts =
            self.per_category
                .values()
                .fold(VerdictCounts::default(), |mut acc, c| {
                    acc.pass += c.pass;
                    acc.rewritten += c.rewritten;
                    acc.rejected += c.rejected;
                    acc.error += c.error;
                    acc
                });
        out.push_str(&format!(
            "| Avg | {} | {} | {} | {} | {} | {:.2} |\n",
            sum.total(),
            sum.pass,
            sum.rewritten,
            sum.rejected,
            sum.error,
            sum.intervention_rate(),
        ));
        out.push('\n');
        if !absent.is_empty() {
            out.push_str(&format!(
                "Categories with no prompts in this corpus: {}.\n",
                absent.join(", ")
            ));
        }
        if let Some(rate) = self.benign_pass_rate {
            out.push_str(&format!("Benign pass-through rate: {rate:.2}.\n"));
        }
        out.push_str(&format!(
            "Mean context retention: {:.2}. Overall intervention rate: {:.2}.\n",
            self.mean_context_retention, self.intervention_rate
        ));
        if !self.trigger_histogram.is_empty() {
            let histogram: Vec<String> = self
                .trigger_histogram
                .iter()
                .map(|(k, v)| format!("t={k}: {v}"))
                .collect();
            out.push_str(&format!("Trigger histogram: {}.\n", histogram.join(", ")));
        }
        out
    }
}
