//! Text-in/text-out model clients shared by the consensus judges and the
//! LLM-mode question generator.

use std::collections::HashMap;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::ClientError;

/// A model endpoint that maps a prompt to raw text.
pub trait LlmClient: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, prompt: &str) -> Result<String, ClientError>;
}

impl<C: LlmClient + ?Sized> LlmClient for Box<C> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        (**self).complete(prompt)
    }
}

/// Bounded retries with exponential backoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            initial_backoff_ms: 500,
        }
    }
}

impl RetryPolicy {
    fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(1 << attempt.min(16)))
    }
}

/// Endpoint settings for an OpenAI-compatible chat-completions service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_timeout() -> u64 {
    120
}

/// Blocking HTTP client for `POST {base_url}/chat/completions`.
pub struct HttpChatClient {
    name: String,
    config: EndpointConfig,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl HttpChatClient {
    pub fn new(name: impl Into<String>, config: EndpointConfig) -> Result<Self, ClientError> {
        let name = name.into();
        let api_key = config.api_key_env.as_deref().and_then(|var| std::env::var(var).ok());
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ClientError::Unavailable {
                client: name.clone(),
                message: e.to_string(),
            })?;
        Ok(HttpChatClient {
            name,
            config,
            api_key,
            http,
        })
    }

    fn attempt(&self, prompt: &str) -> Result<String, String> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0.0,
        });
        let mut request = self.http.post(url).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| e.to_string())?;
        let status = response.status();
        if !status.is_success() {
            return Err(format!("HTTP {status}"));
        }
        let parsed: ChatResponse = response.json().map_err(|e| e.to_string())?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| "response has no choices".to_string())
    }
}

impl LlmClient for HttpChatClient {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        let retry = self.config.retry;
        let mut last_error = String::new();
        for attempt in 0..=retry.max_retries {
            match self.attempt(prompt) {
                Ok(text) => return Ok(text),
                Err(e) => {
                    log::warn!("{}: attempt {} failed: {e}", self.name, attempt + 1);
                    last_error = e;
                    if attempt < retry.max_retries {
                        thread::sleep(retry.backoff(attempt));
                    }
                }
            }
        }
        Err(ClientError::Unavailable {
            client: self.name.clone(),
            message: last_error,
        })
    }
}

/// Replays previously recorded responses keyed by prompt.
#[derive(Debug, Clone)]
pub struct ReplayClient {
    name: String,
    responses: HashMap<String, String>,
}

impl ReplayClient {
    pub fn new(name: impl Into<String>, pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        ReplayClient {
            name: name.into(),
            responses: pairs.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl LlmClient for ReplayClient {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        self.responses
            .get(prompt)
            .cloned()
            .ok_or_else(|| ClientError::ReplayMiss {
                client: self.name.clone(),
            })
    }
}
