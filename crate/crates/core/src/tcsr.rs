//! Stage three: substitute the trajectory suffix from the trigger onward
//! under the derived constraint, re-assemble a prompt with the context
//! hard-locked, and validate the candidate by re-analyzing it end to end.

use crate::backend::{AnalyzerBackend, RewriteRequest};
use crate::error::{PipelineError, PipelineStage};
use crate::types::{
    ActionTrajectory, IntentAnchor, PipelineConfig, Provenance, RawPrompt, SafeConstraint,
    SceneContext, SceneState,
};
use crate::{msd, trpg};

/// Replace states from the constraint's trigger onward. The prefix is
/// adopted byte-for-byte; replaced states are marked as extrapolated.
pub async fn substitute_trajectory(
    trajectory: &ActionTrajectory,
    constraint: &SafeConstraint,
    context: &SceneContext,
    intent: &IntentAnchor,
    attempt: usize,
    backend: &dyn AnalyzerBackend,
) -> Result<ActionTrajectory, PipelineError> {
    let trigger = constraint.preserve_prefix_upto;
    let descriptions: Vec<String> = trajectory
        .states
        .iter()
        .map(|s| s.description.clone())
        .collect();
    if trigger >= descriptions.len() {
        return Err(PipelineError::SubstitutionFailure(format!(
            "trigger {trigger} is outside the trajectory"
        )));
    }

    let replacements = backend
        .rewrite_states(RewriteRequest {
            states: &descriptions,
            trigger_index: trigger,
            neutralize: &constraint.neutralize,
            context,
            intent: &intent.summary,
            attempt,
        })
        .await
        .map_err(|e| PipelineError::backend(PipelineStage::Tcsr, e))?;
    let expected = descriptions.len() - trigger;
    if replacements.len() != expected {
        return Err(PipelineError::SubstitutionFailure(format!(
            "expected {expected} replacement states, got {}",
            replacements.len()
        )));
    }
    if replacements.iter().any(|s| s.trim().is_empty()) {
        return Err(PipelineError::SubstitutionFailure(
            "backend produced an empty replacement state".into(),
        ));
    }

    let mut states: Vec<SceneState> = trajectory.states[..trigger].to_vec();
    for (offset, description) in replacements.into_iter().enumerate() {
        states.push(SceneState::new(
            trigger + offset,
            trajectory.horizon,
            description,
            Provenance::Extrapolated,
        ));
    }
    Ok(ActionTrajectory::new(states, trajectory.horizon))
}

/// Compose the locked context and the candidate trajectory into one prompt.
pub async fn assemble(
    context: &SceneContext,
    trajectory: &ActionTrajectory,
    backend: &dyn AnalyzerBackend,
) -> Result<String, PipelineError> {
    let states: Vec<String> = trajectory
        .states
        .iter()
        .map(|s| s.description.clone())
        .collect();
    let prompt = backend
        .render_prompt(context, &states)
        .await
        .map_err(|e| PipelineError::backend(PipelineStage::Tcsr, e))?;
    if prompt.trim().is_empty() {
        return Err(PipelineError::AssemblyFailure(
            "backend rendered an empty prompt".into(),
        ));
    }
    Ok(prompt)
}

/// Outcome of re-analyzing one rewrite candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOutcome {
    pub accepted: bool,
    /// Highest risk observed anywhere in the candidate: composite anchor
    /// risk or static-finding severity.
    pub residual_max_risk: f64,
    /// Whether every original context string survived verbatim.
    pub context_preserved: bool,
}

/// Validate a candidate by running decomposition, rollout, and assessment on
/// it from scratch. Accepted iff the residual risk stays below the threshold
/// and every original context string appears verbatim in the candidate.
pub async fn validate_rewrite(
    candidate_prompt: &str,
    original_context: &SceneContext,
    config: &PipelineConfig,
    backend: &dyn AnalyzerBackend,
) -> Result<ValidationOutcome, PipelineError> {
    let probe = RawPrompt::new("rewrite-validation", candidate_prompt);
    let decoupled = msd::decompose(&probe, backend, config).await?;
    let rolled = trpg::rollout(
        &decoupled.trajectory,
        &decoupled.context,
        backend,
        config.horizon,
    )
    .await?;
    let vectors = trpg::assess(&rolled, &decoupled.context, backend).await?;

    let anchor_max = trpg::aggregate(&vectors)?
        .into_iter()
        .fold(0.0, f64::max);
    let static_max = decoupled
        .static_findings
        .iter()
        .map(|f| f.severity)
        .fold(0.0, f64::max);
    let residual_max_risk = anchor_max.max(static_max);

    let context_preserved = original_context
        .strings()
        .iter()
        .all(|s| candidate_prompt.contains(s));

    Ok(ValidationOutcome {
        accepted: residual_max_risk < config.tau && context_preserved,
        residual_max_risk,
        context_preserved,
    })
}
