//! Chat-completion model client.

use std::time::Duration;

use async_trait::async_trait;
use serde_json::{json, Value};
use thiserror::Error;

use super::prompt::{PromptBundle, Role};

pub const DEFAULT_MODEL_TIMEOUT: Duration = Duration::from_secs(10);
pub const DEFAULT_MODEL_NAME: &str = "gpt-4";

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("model request failed: {0}")]
    Transport(String),
    #[error("model endpoint returned HTTP {0}")]
    Status(u16),
    #[error("model response has no message content")]
    NoContent,
    #[error("model client not configured: {0}")]
    Config(String),
}

/// Returns the raw reply text for a prompt. Implementations may block for a
/// long time; callers bound them with a timeout.
#[async_trait]
pub trait ModelClient: Send + Sync {
    async fn complete(&self, prompt: &PromptBundle) -> Result<String, ClientError>;
}

/// Client settings taken from `MODEL_ENDPOINT`, `MODEL_API_KEY`,
/// `MODEL_TIMEOUT_S` and `MODEL_NAME`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientSettings {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub model: String,
}

impl ClientSettings {
    /// `Ok(None)` when no endpoint is configured.
    pub fn from_env() -> Result<Option<Self>, ClientError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Option<Self>, ClientError> {
        let Some(endpoint) = get("MODEL_ENDPOINT").filter(|e| !e.trim().is_empty()) else {
            return Ok(None);
        };
        let timeout = match get("MODEL_TIMEOUT_S") {
            None => DEFAULT_MODEL_TIMEOUT,
            Some(raw) => {
                let secs: f64 = raw
                    .trim()
                    .parse()
                    .map_err(|_| ClientError::Config(format!("MODEL_TIMEOUT_S={raw:?}")))?;
                if !secs.is_finite() || secs <= 0.0 {
                    return Err(ClientError::Config(format!("MODEL_TIMEOUT_S={raw:?}")));
                }
                Duration::from_secs_f64(secs)
            }
        };
        Ok(Some(ClientSettings {
            endpoint: endpoint.trim().to_string(),
            api_key: get("MODEL_API_KEY").filter(|k| !k.is_empty()),
            timeout,
            model: get("MODEL_NAME").unwrap_or_else(|| DEFAULT_MODEL_NAME.to_string()),
        }))
    }
}

/// OpenAI-style `chat/completions` adapter.
#[derive(Debug, Clone)]
pub struct HttpModelClient {
    http: reqwest::Client,
    settings: ClientSettings,
}

impl HttpModelClient {
    pub fn new(settings: ClientSettings) -> Result<Self, ClientError> {
        let http = reqwest::Client::builder()
            .timeout(settings.timeout)
            .build()
            .map_err(|e| ClientError::Config(e.to_string()))?;
        Ok(HttpModelClient { http, settings })
    }

    pub fn settings(&self) -> &ClientSettings {
        &self.settings
    }

    fn request_body(&self, prompt: &PromptBundle) -> Value {
        let mut messages = vec![json!({
            "role": "system",
            "content": format!(
                "{}\n\n### ROBOT STATE\n{}\n### COMMAND API\n{}",
                prompt.system_context, prompt.state_snippet, prompt.command_api_doc
            ),
        })];
        for turn in &prompt.history {
            let role = match turn.role {
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            messages.push(json!({"role": role, "content": turn.text}));
        }
        messages.push(json!({"role": "user", "content": prompt.utterance}));
        json!({"model": self.settings.model, "messages": messages, "temperature": 0})
    }
}

#[async_trait]
impl ModelClient for HttpModelClient {
    async fn complete(&self, prompt: &PromptBundle) -> Result<String, ClientError> {
        let mut req = self
            .http
            .post(&self.settings.endpoint)
            .json(&self.request_body(prompt));
        if let Some(key) = &self.settings.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .await
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(ClientError::Status(resp.status().as_u16()));
        }
        let body: Value = resp
            .json()
            .await
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        body.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or(ClientError::NoContent)
    }
}
