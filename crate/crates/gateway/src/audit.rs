//! Line-delimited JSON audit trail with a single writer task.
//!
//! Every mediation request produces exactly one record, including requests
//! that fail before reaching the pipeline. Prompts are stored as SHA-256
//! digests unless plaintext logging is switched on.

use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tokio::io::AsyncWriteExt;
use tokio::sync::mpsc;

use crate::GatewayError;

/// One audit line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditRecord {
    /// Gateway-assigned request id.
    pub request_id: String,
    pub timestamp: DateTime<Utc>,
    /// SHA-256 of the submitted prompt (or raw body when no prompt parsed).
    pub prompt_sha256: String,
    /// The prompt itself; present only when plaintext logging is enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_text: Option<String>,
    /// pass | rewritten | rejected | error
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    pub http_status: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Handle to the audit writer. Cloneable; all clones feed one appender task,
/// so records are never interleaved mid-line.
#[derive(Clone)]
pub struct AuditLog {
    tx: mpsc::UnboundedSender<AuditRecord>,
}

impl AuditLog {
    /// Open (append) the log file and start the writer task.
    pub async fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let file = tokio::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path.as_ref())
            .await
            .map_err(|e| GatewayError::Audit(format!("{}: {e}", path.as_ref().display())))?;
        let (tx, mut rx) = mpsc::unbounded_channel::<AuditRecord>();
        tokio::spawn(async move {
            let mut file = file;
            while let Some(record) = rx.recv().await {
                let mut line = match serde_json::to_string(&record) {
                    Ok(line) => line,
                    Err(e) => {
                        tracing::error!("failed to serialize audit record: {e}");
                        continue;
                    }
                };
                line.push('\n');
                if let Err(e) = file.write_all(line.as_bytes()).await {
                    tracing::error!("failed to append audit record: {e}");
                    continue;
                }
                if let Err(e) = file.flush().await {
                    tracing::error!("failed to flush audit log: {e}");
                }
            }
        });
        Ok(Self { tx })
    }

    /// Queue a record; never blocks the request path.
    pub fn record(&self, record: AuditRecord) {
        if self.tx.send(record).is_err() {
            tracing::error!("audit writer is gone; dropping record");
        }
    }
}
