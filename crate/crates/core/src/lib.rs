//! Prompt-level safety mediation for text-to-video generation.
//!
//! A prompt is factorized into stationary scene context and a temporal
//! action trajectory, the trajectory is rolled forward and scored per
//! anchor, and when risk crosses a threshold the unsafe suffix is rewritten
//! under a derived constraint while the context and the creative intent are
//! preserved verbatim. Benign prompts pass through byte-identical.

pub mod backend;
pub mod error;
pub mod msd;
pub mod pipeline;
pub mod tcsr;
pub mod trpg;
pub mod types;

pub use backend::lexicon::Lexicon;
pub use backend::remote::{RemoteBackend, RemoteBackendConfig};
pub use backend::rule::{rule_score, RuleBackend};
pub use backend::{AnalyzerBackend, BackendStatus};
pub use error::{BackendError, LexiconError, PipelineError};
pub use pipeline::Pipeline;
pub use types::{
    ActionTrajectory, DecoupledPrompt, IntentAnchor, MediationDecision, MediationTrace,
    PipelineConfig, RawPrompt, RiskProfile, RiskVector, SafeConstraint, SafetyCategory,
    SceneContext, SceneState, StageSwitches, StageTimings, StaticFinding, Verdict,
};
