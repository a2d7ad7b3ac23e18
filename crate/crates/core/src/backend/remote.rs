//! HTTP backend that delegates semantic judgments to an external model
//! service.
//!
//! Wire contract: every operation is a `POST` to one endpoint with
//! `{model, instruction, input, response_schema_id}` and expects
//! `{ok, data}` or `{ok: false, error}`. Responses are validated against the
//! operation's schema; a malformed response triggers a bounded number of
//! repair retries before surfacing [`BackendError::MalformedResponse`]. A
//! transport failure surfaces [`BackendError::Unavailable`] immediately.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use crate::error::BackendError;
use crate::types::{ContextField, RiskVector, SafetyCategory, SceneContext, StaticFinding};

use super::rule::RuleBackend;
use super::{
    AnalyzerBackend, BackendStatus, ConstraintDirective, ConstraintRequest, RawDecomposition,
    RewriteRequest,
};

/// Connection settings for the remote judgment service.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteBackendConfig {
    /// Full URL of the judgment endpoint.
    pub endpoint: String,
    /// Model identifier forwarded verbatim in every request.
    pub model: String,
    /// Name of the environment variable holding the bearer credential. The
    /// credential itself is read lazily and never logged or serialized.
    pub credential_env: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    /// Repair retries after a schema-invalid response.
    #[serde(default = "default_max_retries")]
    pub max_retries: usize,
    /// Cap on concurrent in-flight requests.
    #[serde(default = "default_max_concurrency")]
    pub max_concurrency: usize,
}

fn default_timeout_secs() -> u64 {
    30
}

fn default_max_retries() -> usize {
    2
}

fn default_max_concurrency() -> usize {
    8
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    instruction: String,
    input: Value,
    response_schema_id: &'a str,
}

#[derive(Deserialize)]
struct WireResponse {
    ok: bool,
    #[serde(default)]
    data: Option<Value>,
    #[serde(default)]
    error: Option<String>,
}

/// Analyzer that fronts an external LLM judgment service.
pub struct RemoteBackend {
    config: RemoteBackendConfig,
    client: reqwest::Client,
    limiter: Arc<Semaphore>,
    /// Optional deterministic fallback used when a rewrite call fails, so a
    /// flaky service degrades to conservative substitutions instead of a
    /// hard rejection.
    rewrite_fallback: Option<RuleBackend>,
}

impl RemoteBackend {
    pub fn new(config: RemoteBackendConfig) -> Result<Self, BackendError> {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let limiter = Arc::new(Semaphore::new(config.max_concurrency.max(1)));
        Ok(Self {
            config,
            client,
            limiter,
            rewrite_fallback: None,
        })
    }

    /// Use the deterministic backend for rewrites when the service fails.
    pub fn with_rewrite_fallback(mut self, fallback: RuleBackend) -> Self {
        self.rewrite_fallback = Some(fallback);
        self
    }

    fn credential(&self) -> Result<String, BackendError> {
        match std::env::var(&self.config.credential_env) {
            Ok(v) if !v.is_empty() => Ok(v),
            _ => Err(BackendError::Auth(format!(
                "credential variable {} is not set",
                self.config.credential_env
            ))),
        }
    }

    /// One operation round-trip with schema validation and repair retries.
    async fn call<T, F>(
        &self,
        instruction: &str,
        input: Value,
        schema_id: &str,
        validate: F,
    ) -> Result<T, BackendError>
    where
        F: Fn(Value) -> Result<T, String>,
    {
        let credential = self.credential()?;
        let _permit = self
            .limiter
            .acquire()
            .await
            .map_err(|_| BackendError::Unavailable("request limiter closed".into()))?;

        let mut instruction = instruction.to_string();
        let mut last_error = String::new();
        for attempt in 0..=self.config.max_retries {
            let request = WireRequest {
                model: &self.config.model,
                instruction: instruction.clone(),
                input: input.clone(),
                response_schema_id: schema_id,
            };
            let response = self
                .client
                .post(&self.config.endpoint)
                .bearer_auth(&credential)
                .json(&request)
                .send()
                .await
                .map_err(|e| {
                    if e.is_timeout() {
                        BackendError::Timeout(format!(
                            "no response within {}s",
                            self.config.timeout_secs
                        ))
                    } else {
                        BackendError::Unavailable(e.to_string())
                    }
                })?;

            let status = response.status();
            if status == reqwest::StatusCode::UNAUTHORIZED
                || status == reqwest::StatusCode::FORBIDDEN
            {
                return Err(BackendError::Auth(format!("service returned {status}")));
            }
            if !status.is_success() {
                return Err(BackendError::Unavailable(format!(
                    "service returned {status}"
                )));
            }

            let body: Result<WireResponse, _> = response.json().await;
            last_error = match body {
                Err(e) => format!("unparseable response body: {e}"),
                Ok(WireResponse { ok: false, error, .. }) => {
                    error.unwrap_or_else(|| "service reported failure".into())
                }
                Ok(WireResponse { data: None, .. }) => "response missing data".into(),
                Ok(WireResponse { data: Some(data), .. }) => match validate(data) {
                    Ok(value) => return Ok(value),
                    Err(reason) => reason,
                },
            };
            if attempt < self.config.max_retries {
                instruction = format!(
                    "{instruction}\nYour previous response was invalid ({last_error}). \
                     Respond again, strictly matching schema {schema_id}."
                );
            }
        }
        Err(BackendError::MalformedResponse(last_error))
    }
}

fn require_unit_range(name: &str, value: f64) -> Result<f64, String> {
    if (0.0..=1.0).contains(&value) && value.is_finite() {
        Ok(value)
    } else {
        Err(format!("{name}={value} is outside [0, 1]"))
    }
}

fn parse_category(raw: &str) -> Result<SafetyCategory, String> {
    raw.parse::<SafetyCategory>()
        .map_err(|_| format!("unknown category '{raw}'"))
}

#[async_trait]
impl AnalyzerBackend for RemoteBackend {
    async fn decompose_raw(&self, text: &str) -> Result<RawDecomposition, BackendError> {
        #[derive(Deserialize)]
        struct Payload {
            subjects: Vec<String>,
            environment: String,
            #[serde(default)]
            style: Vec<String>,
            states: Vec<String>,
            intent: String,
        }
        self.call(
            "Factorize the video prompt into scene context (subjects, environment, style), an \
             ordered list of action states, and a one-line creative intent.",
            json!({ "prompt": text }),
            "decomposition.v1",
            |data| {
                let p: Payload =
                    serde_json::from_value(data).map_err(|e| format!("schema mismatch: {e}"))?;
                if p.states.is_empty() || p.states.iter().any(|s| s.trim().is_empty()) {
                    return Err("states must be a non-empty list of non-empty strings".into());
                }
                if p.intent.trim().is_empty() {
                    return Err("intent must be non-empty".into());
                }
                Ok(RawDecomposition {
                    subjects: p.subjects,
                    environment: p.environment,
                    style: p.style,
                    states: p.states,
                    intent: p.intent,
                })
            },
        )
        .await
    }

    async fn scan_entities(
        &self,
        field: ContextField,
        text: &str,
    ) -> Result<Vec<StaticFinding>, BackendError> {
        #[derive(Deserialize)]
        struct Hit {
            matched_text: String,
            category: String,
            severity: f64,
        }
        #[derive(Deserialize)]
        struct Payload {
            findings: Vec<Hit>,
        }
        self.call(
            "List every inherently unsafe entity mentioned in the text, with the exact matched \
             phrase, its safety category, and a severity in [0, 1].",
            json!({ "field": field, "text": text }),
            "static_findings.v1",
            |data| {
                let p: Payload =
                    serde_json::from_value(data).map_err(|e| format!("schema mismatch: {e}"))?;
                p.findings
                    .into_iter()
                    .map(|h| {
                        Ok(StaticFinding {
                            field,
                            category: parse_category(&h.category)?,
                            severity: require_unit_range("severity", h.severity)?,
                            matched_text: h.matched_text,
                        })
                    })
                    .collect()
            },
        )
        .await
    }

    async fn next_state(
        &self,
        previous: &str,
        context: &SceneContext,
    ) -> Result<String, BackendError> {
        #[derive(Deserialize)]
        struct Payload {
            state: String,
        }
        self.call(
            "Given the scene context and the previous action state, predict the single most \
             plausible next action state as a short clause.",
            json!({ "previous": previous, "context": context }),
            "next_state.v1",
            |data| {
                let p: Payload =
                    serde_json::from_value(data).map_err(|e| format!("schema mismatch: {e}"))?;
                if p.state.trim().is_empty() {
                    return Err("state must be non-empty".into());
                }
                Ok(p.state)
            },
        )
        .await
    }

    async fn score_risk(
        &self,
        state: &str,
        previous: Option<&str>,
        context: &SceneContext,
    ) -> Result<RiskVector, BackendError> {
        #[derive(Deserialize)]
        struct Payload {
            content: f64,
            transition: f64,
            prospective: f64,
        }
        self.call(
            "Score the action state on three risk dimensions in [0, 1]: content (harm shown in \
             the state itself), transition (harm in moving from the previous state to this \
             one; 0 when there is no previous state), prospective (harm this state plausibly \
             escalates toward).",
            json!({ "state": state, "previous": previous, "context": context }),
            "risk_vector.v1",
            |data| {
                let p: Payload =
                    serde_json::from_value(data).map_err(|e| format!("schema mismatch: {e}"))?;
                Ok(RiskVector::new(
                    require_unit_range("content", p.content)?,
                    require_unit_range("transition", p.transition)?,
                    require_unit_range("prospective", p.prospective)?,
                ))
            },
        )
        .await
    }

    async fn constraint_text(
        &self,
        request: ConstraintRequest<'_>,
    ) -> Result<ConstraintDirective, BackendError> {
        #[derive(Deserialize)]
        struct Payload {
            neutralize: String,
            tone_note: String,
            #[serde(default)]
            categories: Vec<String>,
        }
        self.call(
            "Derive a rewrite constraint for the flagged state: what must be neutralized \
             (addressing the causal mechanism on the given risk dimension), a tone note \
             preserving the creative intent, and the safety categories involved.",
            json!({
                "flagged_state": request.flagged_state,
                "previous_state": request.previous_state,
                "dimension": request.dimension,
                "context": request.context,
                "intent": request.intent,
                "threshold": request.tau,
            }),
            "constraint.v1",
            |data| {
                let p: Payload =
                    serde_json::from_value(data).map_err(|e| format!("schema mismatch: {e}"))?;
                if p.neutralize.trim().is_empty() {
                    return Err("neutralize must be non-empty".into());
                }
                let categories = p
                    .categories
                    .iter()
                    .map(|c| parse_category(c))
                    .collect::<Result<BTreeSet<_>, _>>()?;
                Ok(ConstraintDirective {
                    neutralize: p.neutralize,
                    tone_note: p.tone_note,
                    categories,
                })
            },
        )
        .await
    }

    async fn rewrite_states(
        &self,
        request: RewriteRequest<'_>,
    ) -> Result<Vec<String>, BackendError> {
        #[derive(Deserialize)]
        struct Payload {
            states: Vec<String>,
        }
        let expected = request.states.len() - request.trigger_index;
        let result = self
            .call(
                "Rewrite the trajectory suffix from the trigger index onward so the constraint \
                 is satisfied, keeping the creative intent and tone. Return exactly one \
                 replacement clause per replaced state. Later attempts must be strictly more \
                 conservative.",
                json!({
                    "states": request.states,
                    "trigger_index": request.trigger_index,
                    "neutralize": request.neutralize,
                    "context": request.context,
                    "intent": request.intent,
                    "attempt": request.attempt,
                }),
                "rewrite.v1",
                |data| {
                    let p: Payload = serde_json::from_value(data)
                        .map_err(|e| format!("schema mismatch: {e}"))?;
                    if p.states.len() != expected {
                        return Err(format!(
                            "expected {expected} replacement states, got {}",
                            p.states.len()
                        ));
                    }
                    if p.states.iter().any(|s| s.trim().is_empty()) {
                        return Err("replacement states must be non-empty".into());
                    }
                    Ok(p.states)
                },
            )
            .await;
        match (result, &self.rewrite_fallback) {
            (Ok(states), _) => Ok(states),
            (Err(_), Some(fallback)) => fallback.rewrite_states(request).await,
            (Err(e), None) => Err(e),
        }
    }

    async fn render_prompt(
        &self,
        context: &SceneContext,
        states: &[String],
    ) -> Result<String, BackendError> {
        #[derive(Deserialize)]
        struct Payload {
            prompt: String,
        }
        self.call(
            "Compose the scene context and ordered action states into one fluent video \
             generation prompt. Context wording must be preserved verbatim.",
            json!({ "context": context, "states": states }),
            "render.v1",
            |data| {
                let p: Payload =
                    serde_json::from_value(data).map_err(|e| format!("schema mismatch: {e}"))?;
                if p.prompt.trim().is_empty() {
                    return Err("prompt must be non-empty".into());
                }
                Ok(p.prompt)
            },
        )
        .await
    }

    fn status(&self) -> BackendStatus {
        let ready = std::env::var(&self.config.credential_env)
            .map(|v| !v.is_empty())
            .unwrap_or(false);
        BackendStatus {
            kind: "remote".to_string(),
            ready,
            detail: self.config.model.clone(),
        }
    }
}
