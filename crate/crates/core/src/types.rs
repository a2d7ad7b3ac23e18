//! Shared domain types for the mediation pipeline.

use std::collections::BTreeSet;
use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::PipelineError;

/// Maximum prompt length accepted by default, in characters.
pub const DEFAULT_MAX_PROMPT_CHARS: usize = 8192;

/// A raw prompt submitted for mediation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPrompt {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "HashMap::is_empty")]
    pub metadata: HashMap<String, String>,
}

impl RawPrompt {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            metadata: HashMap::new(),
        }
    }

    /// Checks the prompt invariants: non-empty after trimming, within the size cap.
    pub fn validate(&self, max_chars: usize) -> Result<(), PipelineError> {
        if self.text.trim().is_empty() {
            return Err(PipelineError::InvalidPrompt("prompt text is empty".into()));
        }
        if self.text.chars().count() > max_chars {
            return Err(PipelineError::InvalidPrompt(format!(
                "prompt exceeds {max_chars} characters"
            )));
        }
        Ok(())
    }
}

/// The temporally stationary scene elements: subjects, environment, style cues.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneContext {
    pub subjects: Vec<String>,
    pub environment: String,
    pub style: Vec<String>,
}

impl SceneContext {
    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty() && self.environment.is_empty() && self.style.is_empty()
    }

    /// Every non-empty string carried by the context, in field order.
    pub fn strings(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.subjects.iter().map(|s| s.as_str()).collect();
        if !self.environment.is_empty() {
            out.push(self.environment.as_str());
        }
        out.extend(self.style.iter().map(|s| s.as_str()));
        out
    }
}

/// Where a scene state came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Extracted,
    Extrapolated,
}

/// One discretized position of the action trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneState {
    pub index: usize,
    pub stage: String,
    pub description: String,
    pub provenance: Provenance,
}

impl SceneState {
    pub fn new(index: usize, horizon: usize, description: impl Into<String>, provenance: Provenance) -> Self {
        Self {
            index,
            stage: stage_label(index, horizon),
            description: description.into(),
            provenance,
        }
    }
}

/// Stage label: init/mid/end for the default three-stage layout, "stage-k" otherwise.
pub fn stage_label(index: usize, horizon: usize) -> String {
    if horizon == 2 {
        match index {
            0 => "init".to_string(),
            1 => "mid".to_string(),
            2 => "end".to_string(),
            _ => format!("stage-{index}"),
        }
    } else {
        format!("stage-{index}")
    }
}

/// An ordered sequence of scene states. Complete trajectories hold `horizon + 1`
/// states; a pre-rollout trajectory may hold fewer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionTrajectory {
    pub states: Vec<SceneState>,
    pub horizon: usize,
}

impl ActionTrajectory {
    pub fn new(states: Vec<SceneState>, horizon: usize) -> Self {
        Self { states, horizon }
    }

    pub fn is_complete(&self) -> bool {
        self.states.len() == self.horizon + 1
    }

    pub fn descriptions(&self) -> Vec<&str> {
        self.states.iter().map(|s| s.description.as_str()).collect()
    }
}

/// A benign distillation of the user's creative goal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentAnchor {
    pub summary: String,
}

impl IntentAnchor {
    pub fn new(summary: impl Into<String>) -> Self {
        Self { summary: summary.into() }
    }
}

/// Which context field a static finding was located in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextField {
    Subject,
    Environment,
    Style,
}

impl fmt::Display for ContextField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContextField::Subject => write!(f, "subject"),
            ContextField::Environment => write!(f, "environment"),
            ContextField::Style => write!(f, "style"),
        }
    }
}

/// A static-entity hit inside a context field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticFinding {
    pub field: ContextField,
    pub matched_text: String,
    pub category: SafetyCategory,
    pub severity: f64,
}

/// The factorized form of a prompt: context, trajectory, intent, static findings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoupledPrompt {
    pub context: SceneContext,
    pub trajectory: ActionTrajectory,
    pub intent: IntentAnchor,
    pub static_findings: Vec<StaticFinding>,
}

/// Per-anchor risk along the three assessment dimensions. The composite is
/// always derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskVector {
    pub content: f64,
    pub transition: f64,
    pub prospective: f64,
}

impl RiskVector {
    pub const ZERO: RiskVector = RiskVector {
        content: 0.0,
        transition: 0.0,
        prospective: 0.0,
    };

    pub fn new(content: f64, transition: f64, prospective: f64) -> Self {
        Self { content, transition, prospective }
    }

    /// Max over the three dimensions.
    pub fn composite(&self) -> f64 {
        self.content.max(self.transition).max(self.prospective)
    }

    pub fn in_range(&self) -> bool {
        [self.content, self.transition, self.prospective]
            .iter()
            .all(|v| (0.0..=1.0).contains(v))
    }
}

/// The full per-trajectory risk assessment with the located trigger, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskProfile {
    pub vectors: Vec<RiskVector>,
    pub threshold: f64,
    pub trigger: Option<usize>,
}

impl RiskProfile {
    pub fn composites(&self) -> Vec<f64> {
        self.vectors.iter().map(|v| v.composite()).collect()
    }
}

/// Declarative directive pairing what must change with what must be preserved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeConstraint {
    pub neutralize: String,
    pub preserve_prefix_upto: usize,
    pub preserve_intent: IntentAnchor,
    pub tone_note: String,
    pub categories: BTreeSet<SafetyCategory>,
}

/// One candidate produced by the rewrite loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriteAttempt {
    pub attempt_index: usize,
    pub candidate_trajectory: ActionTrajectory,
    pub candidate_prompt: String,
    pub residual_max_risk: f64,
    pub accepted: bool,
}

/// Mediation outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Rewritten,
    Rejected,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => write!(f, "pass"),
            Verdict::Rewritten => write!(f, "rewritten"),
            Verdict::Rejected => write!(f, "rejected"),
        }
    }
}

/// Every intermediate artifact produced while mediating one prompt.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MediationTrace {
    pub decoupled: Option<DecoupledPrompt>,
    pub rolled_trajectory: Option<ActionTrajectory>,
    pub risk_profile: Option<RiskProfile>,
    pub constraint: Option<SafeConstraint>,
    pub attempts: Vec<RewriteAttempt>,
    pub rejection_reason: Option<String>,
}

/// Wall-clock spent per stage, milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTimings {
    pub msd_ms: u64,
    pub trpg_ms: u64,
    pub tcsr_ms: u64,
    pub total_ms: u64,
}

/// The pipeline's decision for one prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediationDecision {
    pub verdict: Verdict,
    pub output_text: Option<String>,
    pub trace: MediationTrace,
    pub elapsed: StageTimings,
}

impl MediationDecision {
    /// Trigger anchor, when the risk profile located one.
    pub fn trigger(&self) -> Option<usize> {
        self.trace.risk_profile.as_ref().and_then(|p| p.trigger)
    }

    /// Categories recorded on the derived constraint, if any.
    pub fn categories(&self) -> BTreeSet<SafetyCategory> {
        self.trace
            .constraint
            .as_ref()
            .map(|c| c.categories.clone())
            .unwrap_or_default()
    }
}

/// The closed safety-category taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SafetyCategory {
    Pornography,
    BorderlinePornography,
    Violence,
    Gore,
    DisturbingContent,
    PublicFigures,
    Discrimination,
    PoliticalSensitivity,
    Copyright,
    IllegalActivities,
    Misinformation,
    SequentialAction,
    DynamicVariation,
    CoherentContextual,
}

impl SafetyCategory {
    pub const ALL: [SafetyCategory; 14] = [
        SafetyCategory::Pornography,
        SafetyCategory::BorderlinePornography,
        SafetyCategory::Violence,
        SafetyCategory::Gore,
        SafetyCategory::DisturbingContent,
        SafetyCategory::PublicFigures,
        SafetyCategory::Discrimination,
        SafetyCategory::PoliticalSensitivity,
        SafetyCategory::Copyright,
        SafetyCategory::IllegalActivities,
        SafetyCategory::Misinformation,
        SafetyCategory::SequentialAction,
        SafetyCategory::DynamicVariation,
        SafetyCategory::CoherentContextual,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SafetyCategory::Pornography => "Pornography",
            SafetyCategory::BorderlinePornography => "BorderlinePornography",
            SafetyCategory::Violence => "Violence",
            SafetyCategory::Gore => "Gore",
            SafetyCategory::DisturbingContent => "DisturbingContent",
            SafetyCategory::PublicFigures => "PublicFigures",
            SafetyCategory::Discrimination => "Discrimination",
            SafetyCategory::PoliticalSensitivity => "PoliticalSensitivity",
            SafetyCategory::Copyright => "Copyright",
            SafetyCategory::IllegalActivities => "IllegalActivities",
            SafetyCategory::Misinformation => "Misinformation",
            SafetyCategory::SequentialAction => "SequentialAction",
            SafetyCategory::DynamicVariation => "DynamicVariation",
            SafetyCategory::CoherentContextual => "CoherentContextual",
        }
    }
}

impl fmt::Display for SafetyCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SafetyCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SafetyCategory::ALL
            .iter()
            .find(|c| c.name() == s)
            .copied()
            .ok_or_else(|| format!("unknown safety category: {s}"))
    }
}

/// Which pipeline stages are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSwitches {
    pub msd_enabled: bool,
    pub trpg_enabled: bool,
    pub tcsr_enabled: bool,
}

impl Default for StageSwitches {
    fn default() -> Self {
        Self {
            msd_enabled: true,
            trpg_enabled: true,
            tcsr_enabled: true,
        }
    }
}

/// Tunable pipeline parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub tau: f64,
    pub horizon: usize,
    pub max_rewrite_attempts: usize,
    pub hard_static_threshold: f64,
    pub stage_switches: StageSwitches,
    pub max_prompt_chars: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            horizon: 2,
            max_rewrite_attempts: 2,
            hard_static_threshold: 0.9,
            stage_switches: StageSwitches::default(),
            max_prompt_chars: DEFAULT_MAX_PROMPT_CHARS,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(PipelineError::InvalidConfig(format!(
                "tau must be in (0, 1], got {}",
                self.tau
            )));
        }
        if !(1..=8).contains(&self.horizon) {
            return Err(PipelineError::InvalidConfig(format!(
                "horizon must be in [1, 8], got {}",
                self.horizon
            )));
        }
        if !(0.0..=1.0).contains(&self.hard_static_threshold) {
            return Err(PipelineError::InvalidConfig(format!(
                "hard_static_threshold must be in [0, 1], got {}",
                self.hard_static_threshold
            )));
        }
        Ok(())
    }
}
