//! Stage one: decompose a prompt into stationary scene context, an ordered
//! action trajectory, and a benign intent anchor, then screen the context
//! fields for inherently unsafe entities.

use crate::backend::AnalyzerBackend;
use crate::error::{PipelineError, PipelineStage};
use crate::types::{
    ActionTrajectory, ContextField, DecoupledPrompt, IntentAnchor, PipelineConfig, Provenance,
    RawPrompt, SceneContext, SceneState, StaticFinding,
};

/// Fallback intent when the backend's summary itself names unsafe content.
const NEUTRAL_INTENT: &str = "depict a safe, stylized scene";

/// Factorize a prompt and screen its context fields.
pub async fn decompose(
    prompt: &RawPrompt,
    backend: &dyn AnalyzerBackend,
    config: &PipelineConfig,
) -> Result<DecoupledPrompt, PipelineError> {
    prompt.validate(config.max_prompt_chars)?;

    let raw = backend
        .decompose_raw(&prompt.text)
        .await
        .map_err(|e| PipelineError::backend(PipelineStage::Msd, e))?;
    if raw.states.is_empty() || raw.states.iter().all(|s| s.trim().is_empty()) {
        return Err(PipelineError::DecompositionFailure(
            "backend produced no action states".into(),
        ));
    }

    let context = SceneContext {
        subjects: raw.subjects,
        environment: raw.environment,
        style: raw.style,
    };

    // Extracted states beyond the horizon are dropped; the rollout stage
    // extrapolates when there are fewer.
    let states: Vec<SceneState> = raw
        .states
        .into_iter()
        .take(config.horizon + 1)
        .enumerate()
        .map(|(i, desc)| SceneState::new(i, config.horizon, desc, Provenance::Extracted))
        .collect();
    let trajectory = ActionTrajectory::new(states, config.horizon);

    let static_findings = static_screen(&context, backend).await?;

    // The intent anchor must never restate a hard unsafe entity; if the
    // backend's summary does, fall back to a neutral one.
    let intent_findings = backend
        .scan_entities(ContextField::Subject, &raw.intent)
        .await
        .map_err(|e| PipelineError::backend(PipelineStage::Msd, e))?;
    let intent_is_unsafe = intent_findings
        .iter()
        .any(|f| f.severity >= config.hard_static_threshold);
    let intent = IntentAnchor::new(if intent_is_unsafe {
        NEUTRAL_INTENT.to_string()
    } else {
        raw.intent
    });

    Ok(DecoupledPrompt {
        context,
        trajectory,
        intent,
        static_findings,
    })
}

/// Screen every context field for unsafe static entities. Findings are
/// returned in field order (subjects, environment, style), preserving the
/// backend's in-field ordering.
pub async fn static_screen(
    context: &SceneContext,
    backend: &dyn AnalyzerBackend,
) -> Result<Vec<StaticFinding>, PipelineError> {
    let mut findings = Vec::new();
    for subject in &context.subjects {
        findings.extend(scan(backend, ContextField::Subject, subject).await?);
    }
    if !context.environment.is_empty() {
        findings.extend(scan(backend, ContextField::Environment, &context.environment).await?);
    }
    for cue in &context.style {
        findings.extend(scan(backend, ContextField::Style, cue).await?);
    }
    Ok(findings)
}

async fn scan(
    backend: &dyn AnalyzerBackend,
    field: ContextField,
    text: &str,
) -> Result<Vec<StaticFinding>, PipelineError> {
    backend
        .scan_entities(field, text)
        .await
        .map_err(|e| PipelineError::backend(PipelineStage::Msd, e))
}
