//! Gateway configuration, loaded from TOML.

use std::path::{Path, PathBuf};

use promptgate_core::PipelineConfig;
use serde::{Deserialize, Serialize};

use crate::GatewayError;

fn default_bind_addr() -> String {
    "127.0.0.1:8080".to_string()
}

fn default_max_body_bytes() -> usize {
    64 * 1024
}

fn default_audit_path() -> PathBuf {
    PathBuf::from("audit.jsonl")
}

/// Audit-log settings. Prompts are hashed by default; storing plaintext is
/// an explicit opt-in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditConfig {
    #[serde(default = "default_audit_path")]
    pub path: PathBuf,
    #[serde(default)]
    pub log_plaintext: bool,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            path: default_audit_path(),
            log_plaintext: false,
        }
    }
}

/// Top-level gateway settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GatewayConfig {
    #[serde(default = "default_bind_addr")]
    pub bind_addr: String,
    #[serde(default = "default_max_body_bytes")]
    pub max_body_bytes: usize,
    #[serde(default)]
    pub audit: AuditConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            bind_addr: default_bind_addr(),
            max_body_bytes: default_max_body_bytes(),
            audit: AuditConfig::default(),
            pipeline: PipelineConfig::default(),
        }
    }
}

impl GatewayConfig {
    pub fn from_toml(contents: &str) -> Result<Self, GatewayError> {
        let config: GatewayConfig =
            toml::from_str(contents).map_err(|e| GatewayError::Config(e.to_string()))?;
        config
            .pipeline
            .validate()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let contents = std::fs::read_to_string(path.as_ref())
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml(&contents)
    }
}
