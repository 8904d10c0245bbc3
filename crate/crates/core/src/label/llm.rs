use std::time::Duration;

use serde_json::{json, Value};
use url::Url;

use super::{truncate_chars, MAX_LABEL_CHARS};
use crate::error::{Result, ShieldError};

/// Environment variable holding the bearer token for the chat endpoint.
pub const API_KEY_ENV: &str = "SHIELD_LLM_API_KEY";

/// A chat-completion backend. Errors are plain messages; they only feed the
/// retry loop and the log.
pub trait ChatClient: Send + Sync {
    fn complete(&self, prompt: &str) -> std::result::Result<String, String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Extra attempts after the first.
    pub retries: u32,
    /// Delay before the first retry; doubles on each further one.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 2,
            base_delay: Duration::from_millis(500),
        }
    }
}

pub fn build_prompt(member_pts: &[String]) -> String {
    format!(
        "The following MedDRA Preferred Terms form one cluster of related adverse events: {}. \
         Reply with only a single unifying medical concept name (max 6 words).",
        member_pts.join(", ")
    )
}

/// First nonempty line of a reply, trimmed and cut to 60 characters.
pub fn sanitize_label(reply: &str) -> Option<String> {
    let line = reply.lines().map(str::trim).find(|l| !l.is_empty())?;
    let line = line
        .trim_matches(|c| c == '"' || c == '\'' || c == '*')
        .trim();
    if line.is_empty() {
        return None;
    }
    Some(truncate_chars(line, MAX_LABEL_CHARS))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl LlmConfig {
    /// Reads the API key from the environment.
    pub fn from_env(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            timeout: Duration::from_secs(60),
        }
    }
}

/// Blocking client for an OpenAI-style `chat/completions` endpoint.
pub struct HttpChatClient {
    endpoint: Url,
    model: String,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpChatClient {
    /// Validates the configuration without touching the network.
    pub fn new(config: &LlmConfig) -> Result<Self> {
        let endpoint = Url::parse(&config.endpoint)
            .map_err(|e| ShieldError::Config(format!("LLM endpoint `{}`: {e}", config.endpoint)))?;
        if !matches!(endpoint.scheme(), "http" | "https") || endpoint.host_str().is_none() {
            return Err(ShieldError::Config(format!(
                "LLM endpoint `{}` must be an http(s) URL",
                config.endpoint
            )));
        }
        if config.model.trim().is_empty() {
            return Err(ShieldError::Config("LLM model name is empty".into()));
        }
        let api_key = config
            .api_key
            .clone()
            .ok_or_else(|| ShieldError::Config(format!("{API_KEY_ENV} is not set")))?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .new_agent();
        Ok(Self {
            endpoint,
            model: config.model.clone(),
            api_key,
            agent,
        })
    }

    fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        })
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, prompt: &str) -> std::result::Result<String, String> {
        let mut response = self
            .agent
            .post(self.endpoint.as_str())
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(self.request_body(prompt))
            .map_err(|e| e.to_string())?;
        let body: Value = response.body_mut().read_json().map_err(|e| e.to_string())?;
        body.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| "response has no choices[0].message.content".to_string())
    }
}
