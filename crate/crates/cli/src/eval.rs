//! Batch evaluation: mediate a corpus, aggregate verdict statistics.

use std::collections::BTreeMap;
use std::time::Instant;

use futures::stream::{self, StreamExt};
use promptgate_core::backend::matcher;
use promptgate_core::{Pipeline, PipelineConfig, RawPrompt, Verdict};

use crate::corpus::{CorpusRecord, Label};
use crate::report::{EvalReport, PromptOutcome, VerdictCounts};

pub const DEFAULT_WORKERS: usize = 8;

/// Fraction of the context's tokens that appear verbatim in the output.
/// Whole-word matching, case-insensitive, mirroring the pipeline's own
/// matching rules. An empty context is trivially fully retained.
pub fn context_retention(context_strings: &[&str], output: &str) -> f64 {
    let output_words: std::collections::HashSet<String> = matcher::tokenize(output)
        .into_iter()
        .map(|t| t.word)
        .collect();
    let mut total = 0usize;
    let mut kept = 0usize;
    for s in context_strings {
        for token in matcher::tokenize(s) {
            total += 1;
            if output_words.contains(&token.word) {
                kept += 1;
            }
        }
    }
    if total == 0 {
        1.0
    } else {
        kept as f64 / total as f64
    }
}

async fn mediate_record(pipeline: &Pipeline, record: &CorpusRecord) -> PromptOutcome {
    let prompt = RawPrompt::new(record.id.clone(), record.prompt.clone());
    match pipeline.mediate(&prompt).await {
        Ok(decision) => {
            let context_retention = decision.output_text.as_deref().map(|output| {
                let context = decision
                    .trace
                    .decoupled
                    .as_ref()
                    .map(|d| d.context.strings())
                    .unwrap_or_default();
                context_retention(&context, output)
            });
            PromptOutcome {
                id: record.id.clone(),
                label: record.label,
                category: record.category,
                verdict: decision.verdict.to_string(),
                trigger: decision.trigger(),
                context_retention,
                output_text: decision.output_text,
                error: None,
            }
        }
        Err(e) => PromptOutcome {
            id: record.id.clone(),
            label: record.label,
            category: record.category,
            verdict: "error".to_string(),
            trigger: None,
            context_retention: None,
            output_text: None,
            error: Some(e.to_string()),
        },
    }
}

/// Mediate every record once (in parallel up to `workers`) and aggregate.
/// Per-record failures are tallied as errors, never abort the batch.
pub async fn run_eval(pipeline: &Pipeline, records: &[CorpusRecord], workers: usize) -> EvalReport {
    let start = Instant::now();
    let mut outcomes: Vec<PromptOutcome> = stream::iter(records)
        .map(|record| mediate_record(pipeline, record))
        .buffer_unordered(workers.max(1))
        .collect()
        .await;
    outcomes.sort_by(|a, b| a.id.cmp(&b.id));
    aggregate(pipeline, outcomes, start.elapsed().as_millis() as u64)
}

fn aggregate(pipeline: &Pipeline, outcomes: Vec<PromptOutcome>, wall_clock_ms: u64) -> EvalReport {
    let mut overall = VerdictCounts::default();
    let mut per_category = BTreeMap::new();
    let mut trigger_histogram: BTreeMap<usize, usize> = BTreeMap::new();
    let mut benign_total = 0usize;
    let mut benign_pass = 0usize;
    let mut retention_sum = 0.0;
    let mut retention_count = 0usize;

    for outcome in &outcomes {
        let counts: &mut VerdictCounts = match outcome.category {
            Some(category) => per_category.entry(category).or_default(),
            None => &mut overall,
        };
        // Categorized records are counted once in their slice and folded
        // into the overall tally at the end.
        tally(counts, &outcome.verdict);
        if let Some(t) = outcome.trigger {
            *trigger_histogram.entry(t).or_default() += 1;
        }
        if outcome.label == Some(Label::Benign) {
            benign_total += 1;
            if outcome.verdict == Verdict::Pass.to_string() {
                benign_pass += 1;
            }
        }
        if let Some(retention) = outcome.context_retention {
            retention_sum += retention;
            retention_count += 1;
        }
    }
    for counts in per_category.values() {
        overall.pass += counts.pass;
        overall.rewritten += counts.rewritten;
        overall.rejected += counts.rejected;
        overall.error += counts.error;
    }

    EvalReport {
        backend: pipeline.backend().status().kind,
        config: *pipeline.config(),
        corpus_size: outcomes.len(),
        intervention_rate: overall.intervention_rate(),
        benign_pass_rate: (benign_total > 0).then(|| benign_pass as f64 / benign_total as f64),
        overall,
        per_category,
        trigger_histogram,
        mean_context_retention: if retention_count == 0 {
            1.0
        } else {
            retention_sum / retention_count as f64
        },
        outcomes,
        wall_clock_ms,
    }
}

fn tally(counts: &mut VerdictCounts, verdict: &str) {
    match verdict {
        "pass" => counts.pass += 1,
        "rewritten" => counts.rewritten += 1,
        "rejected" => counts.rejected += 1,
        _ => counts.error += 1,
    }
}

/// Run one evaluation per threshold, ascending.
pub async fn run_sweep(
    base: &Pipeline,
    records: &[CorpusRecord],
    taus: &[f64],
    workers: usize,
) -> Result<Vec<EvalReport>, promptgate_core::PipelineError> {
    let mut reports = Vec::with_capacity(taus.len());
    for &tau in taus {
        let config = PipelineConfig {
            tau,
            ..*base.config()
        };
        let pipeline = Pipeline::new(base.backend().clone(), config)?;
        reports.push(run_eval(&pipeline, records, workers).await);
    }
    Ok(reports)
}
