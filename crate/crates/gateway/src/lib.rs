//! HTTP mediation gateway.
//!
//! Sits between prompt authors and a downstream video generator: every
//! prompt is mediated first, and only passing or rewritten prompts are ever
//! forwarded. Every request — including malformed and oversized ones — leaves
//! exactly one audit record.

pub mod audit;
pub mod config;

use std::sync::Arc;

use axum::extract::{Request, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::RwLock;
use uuid::Uuid;

use promptgate_core::{
    AnalyzerBackend, BackendStatus, MediationDecision, MediationTrace, Pipeline, PipelineConfig,
    PipelineError, RawPrompt, Verdict,
};

pub use audit::{sha256_hex, AuditLog, AuditRecord};
pub use config::{AuditConfig, GatewayConfig};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("audit log error: {0}")]
    Audit(String),
    #[error("bind error: {0}")]
    Bind(String),
}

/// Sink for mediated prompts. The real deployment posts to a generation
/// service; tests inject recorders.
#[async_trait::async_trait]
pub trait Downstream: Send + Sync {
    async fn submit(&self, prompt: &str) -> Result<(), String>;
}

/// Downstream that accepts everything; used when no generator is wired up.
pub struct NoopDownstream;

#[async_trait::async_trait]
impl Downstream for NoopDownstream {
    async fn submit(&self, _prompt: &str) -> Result<(), String> {
        Ok(())
    }
}

/// Shared service state. The analyzer backend is held in a swappable slot so
/// the service can come up and report readiness before (or without) a
/// backend being attached.
pub struct GatewayState {
    config: GatewayConfig,
    backend: RwLock<Option<Arc<dyn AnalyzerBackend>>>,
    audit: AuditLog,
    downstream: Arc<dyn Downstream>,
}

impl GatewayState {
    pub async fn new(
        config: GatewayConfig,
        downstream: Arc<dyn Downstream>,
    ) -> Result<Arc<Self>, GatewayError> {
        let audit = AuditLog::open(&config.audit.path).await?;
        Ok(Arc::new(Self {
            config,
            backend: RwLock::new(None),
            audit,
            downstream,
        }))
    }

    pub async fn attach_backend(&self, backend: Arc<dyn AnalyzerBackend>) {
        *self.backend.write().await = Some(backend);
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }
}

/// Build the service router.
pub fn router(state: Arc<GatewayState>) -> Router {
    Router::new()
        .route("/v1/mediate", post(mediate_handler))
        .route("/v1/health", get(health_handler))
        .with_state(state)
}

/// Bind and serve until the process exits.
pub async fn serve(state: Arc<GatewayState>) -> Result<(), GatewayError> {
    let addr = state.config.bind_addr.clone();
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| GatewayError::Bind(format!("{addr}: {e}")))?;
    tracing::info!("gateway listening on {addr}");
    axum::serve(listener, router(state))
        .await
        .map_err(|e| GatewayError::Bind(e.to_string()))
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
pub struct MediateOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msd_enabled: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trpg_enabled: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tcsr_enabled: Option<bool>,
}

impl MediateOverrides {
    pub fn apply(&self, base: &PipelineConfig) -> PipelineConfig {
        let mut config = *base;
        if let Some(tau) = self.tau {
            config.tau = tau;
        }
        if let Some(horizon) = self.horizon {
            config.horizon = horizon;
        }
        if let Some(v) = self.msd_enabled {
            config.stage_switches.msd_enabled = v;
        }
        if let Some(v) = self.trpg_enabled {
            config.stage_switches.trpg_enabled = v;
        }
        if let Some(v) = self.tcsr_enabled {
            config.stage_switches.tcsr_enabled = v;
        }
        config
    }
}

#[derive(Debug, Deserialize, Serialize)]
pub struct MediateRequest {
    pub prompt: String,
    #[serde(default)]
    pub include_trace: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overrides: Option<MediateOverrides>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MediateResponse {
    pub request_id: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<MediationTrace>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub request_id: String,
    pub error: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendStatus>,
}

async fn health_handler(State(state): State<Arc<GatewayState>>) -> Response {
    let slot = state.backend.read().await;
    match slot.as_ref() {
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(HealthResponse {
                status: "starting".into(),
                backend: None,
            }),
        )
            .into_response(),
        Some(backend) => {
            let status = backend.status();
            let label = if status.ready { "ok" } else { "degraded" };
            (
                StatusCode::OK,
                Json(HealthResponse {
                    status: label.into(),
                    backend: Some(status),
                }),
            )
                .into_response()
        }
    }
}

struct RequestAudit<'a> {
    state: &'a GatewayState,
    request_id: String,
    prompt_sha256: String,
    prompt_text: Option<String>,
}

impl RequestAudit<'_> {
    fn set_prompt(&mut self, prompt: &str) {
        self.prompt_sha256 = sha256_hex(prompt);
        if self.state.config.audit.log_plaintext {
            self.prompt_text = Some(prompt.to_string());
        }
    }

    fn error(&self, status: StatusCode, detail: &str) -> Response {
        self.state.audit.record(AuditRecord {
            request_id: self.request_id.clone(),
            timestamp: Utc::now(),
            prompt_sha256: self.prompt_sha256.clone(),
            prompt_text: self.prompt_text.clone(),
            verdict: "error".into(),
            trigger: None,
            categories: Vec::new(),
            http_status: status.as_u16(),
            detail: Some(detail.to_string()),
        });
        (
            status,
            Json(ErrorResponse {
                request_id: self.request_id.clone(),
                error: detail.to_string(),
            }),
        )
            .into_response()
    }

    fn decided(&self, decision: &MediationDecision) {
        self.state.audit.record(AuditRecord {
            request_id: self.request_id.clone(),
            timestamp: Utc::now(),
            prompt_sha256: self.prompt_sha256.clone(),
            prompt_text: self.prompt_text.clone(),
            verdict: decision.verdict.to_string(),
            trigger: decision.trigger(),
            categories: decision
                .categories()
                .iter()
                .map(|c| c.name().to_string())
                .collect(),
            http_status: StatusCode::OK.as_u16(),
            detail: decision.trace.rejection_reason.clone(),
        });
    }
}

async fn mediate_handler(State(state): State<Arc<GatewayState>>, request: Request) -> Response {
    let mut auditor = RequestAudit {
        state: &state,
        request_id: Uuid::new_v4().to_string(),
        prompt_sha256: sha256_hex(""),
        prompt_text: None,
    };

    // Read the body ourselves so oversized requests are still audited.
    let body = match axum::body::to_bytes(request.into_body(), state.config.max_body_bytes).await {
        Ok(body) => body,
        Err(_) => {
            return auditor.error(
                StatusCode::PAYLOAD_TOO_LARGE,
                &format!("request body exceeds {} bytes", state.config.max_body_bytes),
            );
        }
    };

    let parsed: MediateRequest = match serde_json::from_slice(&body) {
        Ok(parsed) => parsed,
        Err(e) => {
            auditor.prompt_sha256 = sha256_hex(&String::from_utf8_lossy(&body));
            return auditor.error(StatusCode::BAD_REQUEST, &format!("invalid request body: {e}"));
        }
    };
    auditor.set_prompt(&parsed.prompt);

    let backend = {
        let slot = state.backend.read().await;
        match slot.as_ref() {
            Some(backend) => Arc::clone(backend),
            None => {
                return auditor.error(
                    StatusCode::SERVICE_UNAVAILABLE,
                    "no analyzer backend attached",
                );
            }
        }
    };

    let config = parsed
        .overrides
        .as_ref()
        .map(|o| o.apply(&state.config.pipeline))
        .unwrap_or(state.config.pipeline);
    let pipeline = match Pipeline::new(backend, config) {
        Ok(pipeline) => pipeline,
        Err(e) => return auditor.error(StatusCode::BAD_REQUEST, &e.to_string()),
    };

    let prompt = RawPrompt::new(auditor.request_id.clone(), parsed.prompt);
    let decision = match pipeline.mediate(&prompt).await {
        Ok(decision) => decision,
        Err(e) => {
            let status = match &e {
                PipelineError::InvalidPrompt(_) | PipelineError::InvalidConfig(_) => {
                    StatusCode::BAD_REQUEST
                }
                e if e.is_backend_unavailable() => StatusCode::SERVICE_UNAVAILABLE,
                _ => StatusCode::BAD_GATEWAY,
            };
            return auditor.error(status, &e.to_string());
        }
    };

    // Forward everything except rejections to the generator.
    if decision.verdict != Verdict::Rejected {
        let output = decision.output_text.as_deref().unwrap_or_default();
        if let Err(e) = state.downstream.submit(output).await {
            return auditor.error(StatusCode::BAD_GATEWAY, &format!("downstream error: {e}"));
        }
    }

    auditor.decided(&decision);
    let response = MediateResponse {
        request_id: auditor.request_id.clone(),
        verdict: decision.verdict,
        output_text: decision.output_text,
        trigger: decision.trace.risk_profile.as_ref().and_then(|p| p.trigger),
        categories: decision
            .trace
            .constraint
            .as_ref()
            .map(|c| c.categories.iter().map(|c| c.name().to_string()).collect())
            .unwrap_or_default(),
        rejection_reason: decision.trace.rejection_reason.clone(),
        trace: parsed.include_trace.then_some(decision.trace),
    };
    (StatusCode::OK, Json(response)).into_response()
}
