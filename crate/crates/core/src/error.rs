//! Error types for the mediation pipeline and its backends.

use thiserror::Error;

/// Transport- and protocol-level failures raised by an analyzer backend.
#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("backend request timed out: {0}")]
    Timeout(String),
    #[error("backend authentication failed: {0}")]
    Auth(String),
}

/// Failures raised while loading or validating a lexicon file.
#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("failed to read lexicon: {0}")]
    Io(#[from] std::io::Error),
    #[error("lexicon parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("lexicon validation error: {0}")]
    Validation(String),
}

/// Pipeline stage in which an error surfaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineStage {
    Msd,
    Trpg,
    Tcsr,
}

impl std::fmt::Display for PipelineStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PipelineStage::Msd => write!(f, "msd"),
            PipelineStage::Trpg => write!(f, "trpg"),
            PipelineStage::Tcsr => write!(f, "tcsr"),
        }
    }
}

/// Errors surfaced by pipeline operations.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid prompt: {0}")]
    InvalidPrompt(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("decomposition failed: {0}")]
    DecompositionFailure(String),
    #[error("rollout failed: {0}")]
    RolloutFailure(String),
    #[error("horizon mismatch: trajectory has {states} states but horizon is {horizon}")]
    HorizonMismatch { states: usize, horizon: usize },
    #[error("risk component out of range: {0}")]
    ComponentOutOfRange(f64),
    #[error("risk profile is empty")]
    EmptyProfile,
    #[error("constraint derivation failed: {0}")]
    ConstraintDerivationFailure(String),
    #[error("trajectory substitution failed: {0}")]
    SubstitutionFailure(String),
    #[error("prompt assembly failed: {0}")]
    AssemblyFailure(String),
    #[error("{stage} stage backend error: {source}")]
    Backend {
        stage: PipelineStage,
        #[source]
        source: BackendError,
    },
}

impl PipelineError {
    pub fn backend(stage: PipelineStage, source: BackendError) -> Self {
        PipelineError::Backend { stage, source }
    }

    /// True when the underlying cause is an unreachable backend.
    pub fn is_backend_unavailable(&self) -> bool {
        matches!(
            self,
            PipelineError::Backend {
                source: BackendError::Unavailable(_) | BackendError::Timeout(_),
                ..
            }
        )
    }
}
