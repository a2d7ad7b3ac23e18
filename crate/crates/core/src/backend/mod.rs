//! Pluggable semantic-judgment backends.
//!
//! The pipeline stages never judge text themselves; they delegate to an
//! [`AnalyzerBackend`]. Two implementations ship: a deterministic
//! lexicon-driven [`rule::RuleBackend`] and an HTTP [`remote::RemoteBackend`]
//! that fronts an external LLM.

pub mod lexicon;
pub mod matcher;
pub mod remote;
pub mod rule;

use std::collections::BTreeSet;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use crate::error::BackendError;
use crate::types::{ContextField, RiskVector, SafetyCategory, SceneContext, StaticFinding};

/// Raw decomposition returned by a backend before the pipeline shapes it into
/// a `DecoupledPrompt`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDecomposition {
    pub subjects: Vec<String>,
    pub environment: String,
    pub style: Vec<String>,
    pub states: Vec<String>,
    pub intent: String,
}

/// Which risk dimension drove a trigger; passed to constraint derivation so
/// the directive can name the causal mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerDimension {
    Content,
    Transition,
    Prospective,
}

/// Inputs for deriving the safe constraint at the trigger anchor.
#[derive(Debug, Clone)]
pub struct ConstraintRequest<'a> {
    pub flagged_state: &'a str,
    pub previous_state: Option<&'a str>,
    pub dimension: TriggerDimension,
    pub context: &'a SceneContext,
    pub intent: &'a str,
    pub tau: f64,
}

/// Backend-produced pieces of a safe constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintDirective {
    pub neutralize: String,
    pub tone_note: String,
    pub categories: BTreeSet<SafetyCategory>,
}

/// Inputs for a counterfactual rewrite of the trajectory suffix.
#[derive(Debug, Clone)]
pub struct RewriteRequest<'a> {
    pub states: &'a [String],
    pub trigger_index: usize,
    pub neutralize: &'a str,
    pub context: &'a SceneContext,
    pub intent: &'a str,
    /// Retry counter; backends may fall back to more conservative
    /// substitutions on later attempts.
    pub attempt: usize,
}

/// Readiness report used by the gateway health endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendStatus {
    pub kind: String,
    pub ready: bool,
    pub detail: String,
}

/// The semantic-judgment surface the pipeline is built against.
///
/// Implementations must be stateless per call and safe to share across
/// concurrent mediations.
#[async_trait]
pub trait AnalyzerBackend: Send + Sync {
    /// Factorize a prompt into subjects, environment, style, states, intent.
    async fn decompose_raw(&self, text: &str) -> Result<RawDecomposition, BackendError>;

    /// Scan one context field for unsafe static entities.
    async fn scan_entities(
        &self,
        field: ContextField,
        text: &str,
    ) -> Result<Vec<StaticFinding>, BackendError>;

    /// Predict the most plausible next scene state.
    async fn next_state(
        &self,
        previous: &str,
        context: &SceneContext,
    ) -> Result<String, BackendError>;

    /// Score one state on the content/transition/prospective dimensions.
    async fn score_risk(
        &self,
        state: &str,
        previous: Option<&str>,
        context: &SceneContext,
    ) -> Result<RiskVector, BackendError>;

    /// Produce the neutralize directive, tone note, and categories for the
    /// flagged anchor.
    async fn constraint_text(
        &self,
        request: ConstraintRequest<'_>,
    ) -> Result<ConstraintDirective, BackendError>;

    /// Rewrite the trajectory suffix from the trigger onward. Returns full
    /// replacement descriptions for indices `trigger_index..states.len()`.
    async fn rewrite_states(
        &self,
        request: RewriteRequest<'_>,
    ) -> Result<Vec<String>, BackendError>;

    /// Compose context and states into one fluent prompt.
    async fn render_prompt(
        &self,
        context: &SceneContext,
        states: &[String],
    ) -> Result<String, BackendError>;

    /// Readiness probe.
    fn status(&self) -> BackendStatus;
}
