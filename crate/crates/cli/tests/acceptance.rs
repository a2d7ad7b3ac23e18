//! Acceptance gate: the ten release criteria for the mediation pipeline,
//! run end to end against the bundled rule backend and fixture corpora.
//! Each criterion prints one `criterion NN <slug>: PASS|FAIL` line; the
//! suite fails if any criterion fails.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use promptgate_cli::corpus::{load_corpus, CorpusRecord};
use promptgate_cli::eval::{run_eval, run_sweep};
use promptgate_core::trpg::locate_trigger;
use promptgate_core::types::StageSwitches;
use promptgate_core::{
    MediationDecision, Pipeline, PipelineConfig, RawPrompt, RiskVector, RuleBackend,
    SafetyCategory, Verdict,
};
use promptgate_gateway::{GatewayConfig, GatewayState, NoopDownstream};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const SWEEP_TAUS: [f64; 5] = [0.2, 0.4, 0.5, 0.7, 0.95];

type CriterionResult = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn pipeline_with(config: PipelineConfig) -> Pipeline {
    Pipeline::new(Arc::new(RuleBackend::bundled()), config).expect("valid config")
}

fn unsafe_corpus() -> Vec<CorpusRecord> {
    load_corpus(fixture("unsafe_corpus.jsonl"), true)
        .expect("unsafe corpus loads")
        .records
}

fn benign_corpus() -> Vec<CorpusRecord> {
    load_corpus(fixture("benign_corpus.jsonl"), true)
        .expect("benign corpus loads")
        .records
}

async fn mediate_all(pipeline: &Pipeline, records: &[CorpusRecord]) -> Vec<MediationDecision> {
    let mut decisions = Vec::with_capacity(records.len());
    for record in records {
        let prompt = RawPrompt::new(record.id.clone(), record.prompt.clone());
        decisions.push(
            pipeline
                .mediate(&prompt)
                .await
                .unwrap_or_else(|e| panic!("mediation failed for {}: {e}", record.id)),
        );
    }
    decisions
}

/// Criterion 1: the trigger locator agrees with an exhaustive scan on
/// randomized risk profiles, including components sitting exactly on the
/// threshold, at 100% over 10,000 cases in under a second.
fn criterion_01_trigger_oracle() -> CriterionResult {
    let mut rng = StdRng::seed_from_u64(0x5afe_0001);
    let mut cases: Vec<(Vec<RiskVector>, f64)> = Vec::with_capacity(10_000);
    for _ in 0..10_000 {
        let tau = SWEEP_TAUS[rng.gen_range(0..SWEEP_TAUS.len())];
        let len = rng.gen_range(1..=6);
        let mut vectors = Vec::with_capacity(len);
        for _ in 0..len {
            let mut component = || -> f64 {
                // One case in five lands exactly on the threshold to probe
                // the inclusive boundary.
                if rng.gen_range(0..5) == 0 {
                    tau
                } else {
                    rng.gen_range(0..=10) as f64 / 10.0
                }
            };
            vectors.push(RiskVector {
                content: component(),
                transition: component(),
                prospective: component(),
            });
        }
        cases.push((vectors, tau));
    }

    let started = Instant::now();
    for (vectors, tau) in &cases {
        let located = locate_trigger(vectors, *tau).map_err(|e| e.to_string())?;
        let brute = vectors.iter().position(|v| v.composite() >= *tau);
        ensure!(
            located == brute,
            "disagreement at tau {tau}: located {located:?}, exhaustive {brute:?} for {vectors:?}"
        );
    }
    let elapsed = started.elapsed();
    ensure!(
        elapsed < Duration::from_secs(1),
        "10,000 comparisons took {elapsed:?}, budget is 1s"
    );
    Ok(())
}

/// Criterion 2: the composite risk dominates every component and is
/// monotone under componentwise increase, over 10,000 random vectors.
fn criterion_02_composite_dominance() -> CriterionResult {
    let mut rng = StdRng::seed_from_u64(0x5afe_0002);
    for _ in 0..10_000 {
        let base = RiskVector {
            content: rng.gen_range(0.0..=1.0),
            transition: rng.gen_range(0.0..=1.0),
            prospective: rng.gen_range(0.0..=1.0),
        };
        let composite = base.composite();
        ensure!(
            composite >= base.content
                && composite >= base.transition
                && composite >= base.prospective,
            "composite {composite} below a component of {base:?}"
        );
        let bumped = RiskVector {
            content: (base.content + rng.gen_range(0.0..=0.5)).min(1.0),
            transition: (base.transition + rng.gen_range(0.0..=0.5)).min(1.0),
            prospective: (base.prospective + rng.gen_range(0.0..=0.5)).min(1.0),
        };
        ensure!(
            bumped.composite() >= composite,
            "composite fell from {composite} to {} after raising components",
            bumped.composite()
        );
    }
    Ok(())
}

/// Criterion 3: every rewrite preserves the trajectory prefix below the
/// trigger byte-for-byte and keeps every context string verbatim in the
/// rewritten prompt.
async fn criterion_03_rewrites_preserve_prefix_and_context() -> CriterionResult {
    let pipeline = pipeline_with(PipelineConfig::default());
    let decisions = mediate_all(&pipeline, &unsafe_corpus()).await;
    let mut rewritten = 0usize;
    for decision in &decisions {
        if decision.verdict != Verdict::Rewritten {
            continue;
        }
        rewritten += 1;
        let trigger = decision
            .trigger()
            .ok_or("rewritten decision without a trigger")?;
        let rolled = decision
            .trace
            .rolled_trajectory
            .as_ref()
            .ok_or("rewritten decision without a rolled trajectory")?;
        let accepted = decision
            .trace
            .attempts
            .iter()
            .find(|a| a.accepted)
            .ok_or("rewritten decision without an accepted attempt")?;
        for k in 0..trigger {
            ensure!(
                rolled.states[k].description == accepted.candidate_trajectory.states[k].description,
                "prefix state {k} changed: {:?} -> {:?}",
                rolled.states[k].description,
                accepted.candidate_trajectory.states[k].description
            );
        }
        let output = decision
            .output_text
            .as_deref()
            .ok_or("rewritten decision without output text")?;
        let context = decision
            .trace
            .decoupled
            .as_ref()
            .ok_or("rewritten decision without a decomposition")?;
        for field in context.context.strings() {
            ensure!(
                output.contains(field),
                "context string {field:?} missing from rewrite {output:?}"
            );
        }
    }
    ensure!(rewritten > 0, "no rewritten decisions to check");
    Ok(())
}

/// Criterion 4: mediated rewrites are fixed points — feeding every
/// rewritten prompt back through the pipeline passes untouched.
async fn criterion_04_rewrites_are_fixed_points() -> CriterionResult {
    let pipeline = pipeline_with(PipelineConfig::default());
    let decisions = mediate_all(&pipeline, &unsafe_corpus()).await;
    let mut checked = 0usize;
    for decision in decisions {
        let Some(output) = decision.output_text.filter(|_| decision.verdict == Verdict::Rewritten)
        else {
            continue;
        };
        checked += 1;
        let again = pipeline
            .mediate(&RawPrompt::new("re-mediation", output.clone()))
            .await
            .map_err(|e| format!("re-mediation failed: {e}"))?;
        ensure!(
            again.verdict == Verdict::Pass,
            "rewrite {output:?} did not pass on re-mediation: {}",
            again.verdict
        );
        ensure!(
            again.output_text.as_deref() == Some(output.as_str()),
            "re-mediation altered an already-safe prompt"
        );
    }
    ensure!(checked > 0, "no rewrites to re-mediate");
    Ok(())
}

/// Criterion 5: the benign corpus passes through 100% byte-identical.
async fn criterion_05_benign_passthrough() -> CriterionResult {
    let pipeline = pipeline_with(PipelineConfig::default());
    let records = benign_corpus();
    let decisions = mediate_all(&pipeline, &records).await;
    for (record, decision) in records.iter().zip(&decisions) {
        ensure!(
            decision.verdict == Verdict::Pass,
            "{} was {} instead of pass",
            record.id,
            decision.verdict
        );
        ensure!(
            decision.output_text.as_deref() == Some(record.prompt.as_str()),
            "{} output differs from its input",
            record.id
        );
    }
    Ok(())
}

/// Criterion 6: sweeping the threshold upward never increases the
/// intervention rate, and per-prompt triggers never move earlier.
async fn criterion_06_threshold_sweep_monotonicity() -> CriterionResult {
    let pipeline = pipeline_with(PipelineConfig::default());
    let records = unsafe_corpus();
    let reports = run_sweep(&pipeline, &records, &SWEEP_TAUS, 8)
        .await
        .map_err(|e| e.to_string())?;
    for window in reports.windows(2) {
        let (lo, hi) = (&window[0], &window[1]);
        ensure!(
            lo.intervention_rate >= hi.intervention_rate,
            "intervention rose from {} (tau {}) to {} (tau {})",
            lo.intervention_rate,
            lo.config.tau,
            hi.intervention_rate,
            hi.config.tau
        );
        let lo_triggers: BTreeMap<&str, usize> = lo
            .outcomes
            .iter()
            .filter_map(|o| o.trigger.map(|t| (o.id.as_str(), t)))
            .collect();
        for outcome in &hi.outcomes {
            if let (Some(hi_trigger), Some(&lo_trigger)) =
                (outcome.trigger, lo_triggers.get(outcome.id.as_str()))
            {
                ensure!(
                    hi_trigger >= lo_trigger,
                    "{}: trigger moved earlier ({lo_trigger} -> {hi_trigger}) as tau rose {} -> {}",
                    outcome.id,
                    lo.config.tau,
                    hi.config.tau
                );
            }
        }
    }
    Ok(())
}

/// Criterion 7: prompts whose states are individually below the threshold
/// but whose adjacent states form an escalation pair are intervened on, and
/// the trigger is attributable to the transition dimension alone.
async fn criterion_07_transition_risk_detection() -> CriterionResult {
    let pipeline = pipeline_with(PipelineConfig::default());
    let tau = pipeline.config().tau;
    let records: Vec<CorpusRecord> = unsafe_corpus()
        .into_iter()
        .filter(|r| r.source.as_deref() == Some("transition"))
        .collect();
    ensure!(!records.is_empty(), "no transition fixtures in the corpus");
    let decisions = mediate_all(&pipeline, &records).await;
    for (record, decision) in records.iter().zip(&decisions) {
        ensure!(
            decision.verdict != Verdict::Pass,
            "{} passed despite an escalating transition",
            record.id
        );
        let profile = decision
            .trace
            .risk_profile
            .as_ref()
            .ok_or_else(|| format!("{} has no risk profile", record.id))?;
        let trigger = profile
            .trigger
            .ok_or_else(|| format!("{} has no trigger", record.id))?;
        let vector = &profile.vectors[trigger];
        ensure!(
            vector.transition >= tau,
            "{}: transition {} below tau at the trigger",
            record.id,
            vector.transition
        );
        ensure!(
            vector.content < tau && vector.prospective < tau,
            "{}: trigger not attributable to transition alone ({vector:?})",
            record.id
        );
    }
    Ok(())
}

/// Criterion 8: 100 concurrent gateway requests all get responses and
/// produce exactly 100 audit records, within 10 seconds.
async fn criterion_08_gateway_concurrency_and_audit() -> CriterionResult {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let audit_path = dir.path().join("audit.jsonl");
    let mut config = GatewayConfig::default();
    config.audit.path = audit_path.clone();
    let state = GatewayState::new(config, Arc::new(NoopDownstream))
        .await
        .map_err(|e| e.to_string())?;
    state.attach_backend(Arc::new(RuleBackend::bundled())).await;
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
        .await
        .map_err(|e| e.to_string())?;
    let base = format!("http://{}", listener.local_addr().map_err(|e| e.to_string())?);
    let app = promptgate_gateway::router(Arc::clone(&state));
    tokio::spawn(async move {
        axum::serve(listener, app).await.expect("gateway serves");
    });

    let records = [benign_corpus(), unsafe_corpus()].concat();
    let client = reqwest::Client::new();
    let started = Instant::now();
    let mut handles = Vec::new();
    for i in 0..100 {
        let client = client.clone();
        let url = format!("{base}/v1/mediate");
        let prompt = records[i % records.len()].prompt.clone();
        handles.push(tokio::spawn(async move {
            client
                .post(&url)
                .json(&serde_json::json!({ "prompt": prompt }))
                .send()
                .await
        }));
    }
    let mut responses = 0usize;
    for handle in handles {
        let response = handle
            .await
            .map_err(|e| e.to_string())?
            .map_err(|e| format!("request failed: {e}"))?;
        ensure!(
            response.status().is_success(),
            "gateway returned {}",
            response.status()
        );
        responses += 1;
    }
    ensure!(responses == 100, "expected 100 responses, got {responses}");

    // The audit log is written by a background task; wait for it to drain.
    let deadline = Instant::now() + Duration::from_secs(5);
    let audit_lines = loop {
        let lines = match tokio::fs::read_to_string(&audit_path).await {
            Ok(contents) => contents.lines().count(),
            Err(_) => 0,
        };
        if lines >= 100 || Instant::now() > deadline {
            break lines;
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    };
    ensure!(
        audit_lines == 100,
        "expected exactly 100 audit records, found {audit_lines}"
    );
    let elapsed = started.elapsed();
    ensure!(
        elapsed < Duration::from_secs(10),
        "100 concurrent requests took {elapsed:?}, budget is 10s"
    );
    Ok(())
}

/// Criterion 9: with rewriting disabled, triggered prompts are rejected;
/// with rollout disabled, unsafe-trajectory prompts with a clean context
/// pass through.
async fn criterion_09_stage_ablations() -> CriterionResult {
    let records = unsafe_corpus();
    let baseline = pipeline_with(PipelineConfig::default());
    let baseline_decisions = mediate_all(&baseline, &records).await;

    let no_rewrite = pipeline_with(PipelineConfig {
        stage_switches: StageSwitches {
            tcsr_enabled: false,
            ..StageSwitches::default()
        },
        ..PipelineConfig::default()
    });
    let mut downgraded = 0usize;
    for (record, decision) in records.iter().zip(&baseline_decisions) {
        if decision.verdict != Verdict::Rewritten {
            continue;
        }
        downgraded += 1;
        let ablated = no_rewrite
            .mediate(&RawPrompt::new(record.id.clone(), record.prompt.clone()))
            .await
            .map_err(|e| e.to_string())?;
        ensure!(
            ablated.verdict == Verdict::Rejected,
            "{}: expected rejection without rewriting, got {}",
            record.id,
            ablated.verdict
        );
    }
    ensure!(downgraded > 0, "no rewritten baselines to downgrade");

    let no_rollout = pipeline_with(PipelineConfig {
        stage_switches: StageSwitches {
            trpg_enabled: false,
            ..StageSwitches::default()
        },
        ..PipelineConfig::default()
    });
    let mut passed = 0usize;
    for record in records
        .iter()
        .filter(|r| r.source.as_deref() != Some("static"))
    {
        let ablated = no_rollout
            .mediate(&RawPrompt::new(record.id.clone(), record.prompt.clone()))
            .await
            .map_err(|e| e.to_string())?;
        ensure!(
            ablated.verdict == Verdict::Pass,
            "{}: trajectory-only risk was still caught with rollout disabled ({})",
            record.id,
            ablated.verdict
        );
        passed += 1;
    }
    ensure!(passed > 0, "no trajectory-risk fixtures to pass through");
    Ok(())
}

/// Criterion 10: the markdown report renders one row for each of the 14
/// safety categories plus an Avg row.
async fn criterion_10_markdown_category_table() -> CriterionResult {
    let pipeline = pipeline_with(PipelineConfig::default());
    let report = run_eval(&pipeline, &unsafe_corpus(), 8).await;
    let markdown = report.to_markdown();
    for category in SafetyCategory::ALL {
        ensure!(
            markdown.contains(&format!("| {category} |")),
            "missing table row for {category}"
        );
    }
    let data_rows = markdown
        .lines()
        .filter(|l| l.starts_with('|') && !l.starts_with("|-") && !l.starts_with("| Category"))
        .count();
    ensure!(
        data_rows == SafetyCategory::ALL.len() + 1,
        "expected 14 category rows plus Avg, found {data_rows}"
    );
    ensure!(markdown.contains("| Avg |"), "missing Avg row");
    Ok(())
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn acceptance_gate() {
    let results: Vec<(&str, CriterionResult)> = vec![
        ("criterion 01 trigger-oracle-equivalence", criterion_01_trigger_oracle()),
        ("criterion 02 composite-risk-dominance", criterion_02_composite_dominance()),
        (
            "criterion 03 rewrite-prefix-and-context-preservation",
            criterion_03_rewrites_preserve_prefix_and_context().await,
        ),
        (
            "criterion 04 rewrite-fixed-point",
            criterion_04_rewrites_are_fixed_points().await,
        ),
        (
            "criterion 05 benign-byte-identical-passthrough",
            criterion_05_benign_passthrough().await,
        ),
        (
            "criterion 06 threshold-sweep-monotonicity",
            criterion_06_threshold_sweep_monotonicity().await,
        ),
        (
            "criterion 07 transition-risk-detection",
            criterion_07_transition_risk_detection().await,
        ),
        (
            "criterion 08 gateway-concurrency-audit",
            criterion_08_gateway_concurrency_and_audit().await,
        ),
        ("criterion 09 stage-ablations", criterion_09_stage_ablations().await),
        (
            "criterion 10 markdown-category-table",
            criterion_10_markdown_category_table().await,
        ),
    ];

    let mut failures = Vec::new();
    for (name, result) in &results {
        match result {
            Ok(()) => println!("{name}: PASS"),
            Err(reason) => {
                println!("{name}: FAIL — {reason}");
                failures.push(format!("{name}: {reason}"));
            }
        }
    }
    assert!(
        failures.is_empty(),
        "{} acceptance criteria failed:\n{}",
        failures.len(),
        failures.join("\n")
    );
}
