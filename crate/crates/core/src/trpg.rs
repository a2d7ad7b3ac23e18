//! Stage two: roll the extracted trajectory forward to the configured
//! horizon, score every anchor on three risk dimensions, and locate the
//! earliest anchor whose composite risk crosses the threshold.

use crate::backend::{AnalyzerBackend, ConstraintRequest, TriggerDimension};
use crate::error::{PipelineError, PipelineStage};
use crate::types::{
    ActionTrajectory, IntentAnchor, Provenance, RiskProfile, RiskVector, SafeConstraint,
    SceneContext, SceneState,
};

/// Extend the extracted prefix with context-conditioned predictions until the
/// trajectory holds `horizon + 1` states. Extracted states are adopted
/// verbatim.
pub async fn rollout(
    trajectory: &ActionTrajectory,
    context: &SceneContext,
    backend: &dyn AnalyzerBackend,
    horizon: usize,
) -> Result<ActionTrajectory, PipelineError> {
    if trajectory.states.is_empty() {
        return Err(PipelineError::RolloutFailure(
            "cannot roll out an empty trajectory".into(),
        ));
    }
    if trajectory.states.len() > horizon + 1 {
        return Err(PipelineError::HorizonMismatch {
            states: trajectory.states.len(),
            horizon,
        });
    }
    let mut states: Vec<SceneState> = trajectory
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| SceneState::new(i, horizon, s.description.clone(), s.provenance))
        .collect();
    while states.len() < horizon + 1 {
        let previous = &states.last().unwrap().description;
        let next = backend
            .next_state(previous, context)
            .await
            .map_err(|e| PipelineError::backend(PipelineStage::Trpg, e))?;
        if next.trim().is_empty() {
            return Err(PipelineError::RolloutFailure(
                "backend predicted an empty state".into(),
            ));
        }
        let index = states.len();
        states.push(SceneState::new(index, horizon, next, Provenance::Extrapolated));
    }
    Ok(ActionTrajectory::new(states, horizon))
}

/// Score every anchor of a complete trajectory. The first anchor has no
/// predecessor, so its transition dimension is zero by construction.
pub async fn assess(
    trajectory: &ActionTrajectory,
    context: &SceneContext,
    backend: &dyn AnalyzerBackend,
) -> Result<Vec<RiskVector>, PipelineError> {
    if !trajectory.is_complete() {
        return Err(PipelineError::HorizonMismatch {
            states: trajectory.states.len(),
            horizon: trajectory.horizon,
        });
    }
    let descriptions = trajectory.descriptions();
    let mut vectors = Vec::with_capacity(descriptions.len());
    for (k, state) in descriptions.iter().enumerate() {
        let previous = if k > 0 { Some(descriptions[k - 1]) } else { None };
        let vector = backend
            .score_risk(state, previous, context)
            .await
            .map_err(|e| PipelineError::backend(PipelineStage::Trpg, e))?;
        vectors.push(vector);
    }
    Ok(vectors)
}

/// Composite (max-aggregated) risk per anchor, validating component ranges.
pub fn aggregate(vectors: &[RiskVector]) -> Result<Vec<f64>, PipelineError> {
    for v in vectors {
        if !v.in_range() {
            let bad = [v.content, v.transition, v.prospective]
                .into_iter()
                .find(|c| !(0.0..=1.0).contains(c))
                .unwrap_or(f64::NAN);
            return Err(PipelineError::ComponentOutOfRange(bad));
        }
    }
    Ok(vectors.iter().map(|v| v.composite()).collect())
}

/// Earliest anchor whose composite risk reaches the threshold (inclusive).
pub fn locate_trigger(vectors: &[RiskVector], tau: f64) -> Result<Option<usize>, PipelineError> {
    if vectors.is_empty() {
        return Err(PipelineError::EmptyProfile);
    }
    let composites = aggregate(vectors)?;
    Ok(composites.iter().position(|&c| c >= tau))
}

/// Assemble the per-anchor vectors into a profile with its located trigger.
pub fn build_profile(vectors: Vec<RiskVector>, tau: f64) -> Result<RiskProfile, PipelineError> {
    let trigger = locate_trigger(&vectors, tau)?;
    Ok(RiskProfile {
        vectors,
        threshold: tau,
        trigger,
    })
}

/// Derive the rewrite constraint at the trigger anchor.
///
/// The dimension named to the backend follows a fixed priority — transition,
/// then content, then prospective — so the directive addresses the causal
/// mechanism of the flagged step rather than whichever dimension happens to
/// be numerically largest.
pub async fn derive_constraint(
    trajectory: &ActionTrajectory,
    vectors: &[RiskVector],
    trigger: usize,
    context: &SceneContext,
    intent: &IntentAnchor,
    tau: f64,
    backend: &dyn AnalyzerBackend,
) -> Result<SafeConstraint, PipelineError> {
    let descriptions = trajectory.descriptions();
    if trigger >= descriptions.len() || trigger >= vectors.len() {
        return Err(PipelineError::ConstraintDerivationFailure(format!(
            "trigger {trigger} is outside the trajectory"
        )));
    }
    let vector = &vectors[trigger];
    let dimension = if vector.transition >= tau {
        TriggerDimension::Transition
    } else if vector.content >= tau {
        TriggerDimension::Content
    } else if vector.prospective >= tau {
        TriggerDimension::Prospective
    } else {
        // Static-forced triggers carry no above-threshold dimension; treat
        // the flagged state's own content as the mechanism.
        TriggerDimension::Content
    };

    let directive = backend
        .constraint_text(ConstraintRequest {
            flagged_state: descriptions[trigger],
            previous_state: (trigger > 0).then(|| descriptions[trigger - 1]),
            dimension,
            context,
            intent: &intent.summary,
            tau,
        })
        .await
        .map_err(|e| PipelineError::backend(PipelineStage::Trpg, e))?;
    if directive.neutralize.trim().is_empty() {
        return Err(PipelineError::ConstraintDerivationFailure(
            "backend produced an empty directive".into(),
        ));
    }

    Ok(SafeConstraint {
        neutralize: directive.neutralize,
        preserve_prefix_upto: trigger,
        preserve_intent: intent.clone(),
        tone_note: directive.tone_note,
        categories: directive.categories,
    })
}
