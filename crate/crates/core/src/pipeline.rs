//! End-to-end mediation: decompose, locate risk, rewrite or reject.

use std::sync::Arc;
use std::time::Instant;

use crate::backend::AnalyzerBackend;
use crate::error::PipelineError;
use crate::types::{
    ActionTrajectory, DecoupledPrompt, IntentAnchor, MediationDecision, MediationTrace,
    PipelineConfig, Provenance, RawPrompt, RewriteAttempt, RiskProfile, RiskVector, SceneContext,
    SceneState, StageTimings, Verdict,
};
use crate::{msd, tcsr, trpg};

/// The mediation pipeline: a backend plus a validated configuration.
///
/// Cheap to clone and safe to share across concurrent mediations.
#[derive(Clone)]
pub struct Pipeline {
    backend: Arc<dyn AnalyzerBackend>,
    config: PipelineConfig,
}

impl Pipeline {
    pub fn new(
        backend: Arc<dyn AnalyzerBackend>,
        config: PipelineConfig,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Self { backend, config })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn backend(&self) -> &Arc<dyn AnalyzerBackend> {
        &self.backend
    }

    /// Mediate one prompt: pass it through unchanged, rewrite its unsafe
    /// suffix, or reject it.
    pub async fn mediate(&self, prompt: &RawPrompt) -> Result<MediationDecision, PipelineError> {
        let total_start = Instant::now();
        let mut trace = MediationTrace::default();
        let mut timings = StageTimings::default();
        let backend = self.backend.as_ref();
        let config = &self.config;

        prompt.validate(config.max_prompt_chars)?;

        // Stage one: decomposition and static screening.
        let msd_start = Instant::now();
        let decoupled = if config.stage_switches.msd_enabled {
            msd::decompose(prompt, backend, config).await?
        } else {
            // Ablated: the whole prompt is a single opening state with no
            // separable context, so there is nothing to screen statically.
            let state = SceneState::new(
                0,
                config.horizon,
                prompt.text.trim().to_string(),
                Provenance::Extracted,
            );
            DecoupledPrompt {
                context: SceneContext::default(),
                trajectory: ActionTrajectory::new(vec![state], config.horizon),
                intent: IntentAnchor::new("depict the requested scene"),
                static_findings: Vec::new(),
            }
        };
        timings.msd_ms = msd_start.elapsed().as_millis() as u64;

        // Hard static findings are non-negotiable: the context cannot be
        // rewritten, so the prompt is rejected outright.
        if let Some(hard) = decoupled
            .static_findings
            .iter()
            .find(|f| f.severity >= config.hard_static_threshold)
        {
            trace.rejection_reason = Some(format!(
                "unsafe entity '{}' in the {} field",
                hard.matched_text, hard.field
            ));
            trace.decoupled = Some(decoupled);
            timings.total_ms = total_start.elapsed().as_millis() as u64;
            return Ok(MediationDecision {
                verdict: Verdict::Rejected,
                output_text: None,
                trace,
                elapsed: timings,
            });
        }

        // Stage two: rollout, assessment, trigger localization.
        let trpg_start = Instant::now();
        let (rolled, profile) = if config.stage_switches.trpg_enabled {
            let rolled = trpg::rollout(
                &decoupled.trajectory,
                &decoupled.context,
                backend,
                config.horizon,
            )
            .await?;
            let vectors = trpg::assess(&rolled, &decoupled.context, backend).await?;
            let profile = trpg::build_profile(vectors, config.tau)?;
            (rolled, profile)
        } else {
            // Ablated: no temporal analysis. Any static finding forces a
            // whole-trajectory rewrite; otherwise the prompt passes.
            let has_finding = decoupled.static_findings.iter().any(|f| f.severity > 0.0);
            let rolled = decoupled.trajectory.clone();
            let profile = RiskProfile {
                vectors: vec![RiskVector::ZERO; rolled.states.len()],
                threshold: config.tau,
                trigger: has_finding.then_some(0),
            };
            (rolled, profile)
        };
        timings.trpg_ms = trpg_start.elapsed().as_millis() as u64;

        let trigger = profile.trigger;
        trace.rolled_trajectory = Some(rolled.clone());
        trace.risk_profile = Some(profile.clone());

        let Some(trigger) = trigger else {
            // No anchor crossed the threshold: pass through byte-identical.
            trace.decoupled = Some(decoupled);
            timings.total_ms = total_start.elapsed().as_millis() as u64;
            return Ok(MediationDecision {
                verdict: Verdict::Pass,
                output_text: Some(prompt.text.clone()),
                trace,
                elapsed: timings,
            });
        };

        // Stage three: constrained rewrite, or rejection when disabled.
        let tcsr_start = Instant::now();
        if !config.stage_switches.tcsr_enabled {
            trace.rejection_reason = Some(format!(
                "risk trigger at anchor {trigger} and rewriting is disabled"
            ));
            trace.decoupled = Some(decoupled);
            timings.tcsr_ms = tcsr_start.elapsed().as_millis() as u64;
            timings.total_ms = total_start.elapsed().as_millis() as u64;
            return Ok(MediationDecision {
                verdict: Verdict::Rejected,
                output_text: None,
                trace,
                elapsed: timings,
            });
        }

        let constraint = trpg::derive_constraint(
            &rolled,
            &profile.vectors,
            trigger,
            &decoupled.context,
            &decoupled.intent,
            config.tau,
            backend,
        )
        .await?;
        trace.constraint = Some(constraint.clone());

        let mut accepted_prompt = None;
        for attempt in 0..=config.max_rewrite_attempts {
            let candidate_trajectory = tcsr::substitute_trajectory(
                &rolled,
                &constraint,
                &decoupled.context,
                &decoupled.intent,
                attempt,
                backend,
            )
            .await?;
            let candidate_prompt =
                tcsr::assemble(&decoupled.context, &candidate_trajectory, backend).await?;
            let outcome =
                tcsr::validate_rewrite(&candidate_prompt, &decoupled.context, config, backend)
                    .await?;
            trace.attempts.push(RewriteAttempt {
                attempt_index: attempt,
                candidate_trajectory,
                candidate_prompt: candidate_prompt.clone(),
                residual_max_risk: outcome.residual_max_risk,
                accepted: outcome.accepted,
            });
            if outcome.accepted {
                accepted_prompt = Some(candidate_prompt);
                break;
            }
        }
        timings.tcsr_ms = tcsr_start.elapsed().as_millis() as u64;

        trace.decoupled = Some(decoupled);
        timings.total_ms = total_start.elapsed().as_millis() as u64;
        match accepted_prompt {
            Some(output) => Ok(MediationDecision {
                verdict: Verdict::Rewritten,
                output_text: Some(output),
                trace,
                elapsed: timings,
            }),
            None => {
                trace.rejection_reason = Some(format!(
                    "no compliant rewrite within {} attempts",
                    config.max_rewrite_attempts + 1
                ));
                Ok(MediationDecision {
                    verdict: Verdict::Rejected,
                    output_text: None,
                    trace,
                    elapsed: timings,
                })
            }
        }
    }
}
