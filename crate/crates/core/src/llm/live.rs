//! Chat-completions client for hosted models.
//!
//! Request: `{"model", "messages": [{"role", "content"}], "temperature": 0}`.
//! Response: the first `choices[].message.content`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Backend, ChatMessage, LlmError, DEFAULT_CONTEXT_LIMIT};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiveConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_ms: u64,
    pub context_limit: usize,
}

impl LiveConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: "QEFLOW_API_KEY".into(),
            timeout_ms: 120_000,
            context_limit: DEFAULT_CONTEXT_LIMIT,
        }
    }
}

pub struct LiveBackend {
    config: LiveConfig,
    agent: ureq::Agent,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }
}

impl Backend for LiveBackend {
    fn id(&self) -> String {
        format!("live:{}", self.config.model)
    }

    fn context_limit(&self) -> usize {
        self.config.context_limit
    }

    fn measures_latency(&self) -> bool {
        true
    }

    fn send(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let key = std::env::var(&self.config.api_key_env).map_err(|_| {
            LlmError::BackendUnavailable(format!("environment variable {} is not set", self.config.api_key_env))
        })?;
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": 0,
        });
        let mut response = self
            .agent
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(&body)
            .map_err(|e| LlmError::BackendUnavailable(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::BackendUnavailable(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(LlmError::BackendUnavailable(format!("HTTP {status}: {}", truncate(&text, 200))));
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| LlmError::BackendUnavailable(format!("malformed completion body: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| LlmError::BackendUnavailable("completion has no message content".into()))
    }
}

fn truncate(text: &str, max: usize) -> &str {
    text.char_indices().nth(max).map_or(text, |(i, _)| &text[..i])
}
