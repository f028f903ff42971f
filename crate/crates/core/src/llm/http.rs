use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Backend, ChatRequest, ChatResponse, LlmError, Usage};
use crate::retry::{Attempt, RetryPolicy};

/// Environment variable holding the provider API key.
pub const API_KEY_ENV: &str = "LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Full URL of an OpenAI-compatible `chat/completions` endpoint.
    pub endpoint: String,
    pub timeout_ms: u64,
    pub retry: RetryPolicy,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            timeout_ms: 120_000,
            retry: RetryPolicy::default(),
        }
    }
}

/// Live chat-completions client. Retries 429, 5xx and transport failures.
pub struct HttpBackend {
    client: Client,
    config: HttpConfig,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(config: HttpConfig, api_key: Option<String>) -> Result<Self, LlmError> {
        let client = Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(Self { client, config, api_key })
    }

    /// Reads the key from [`API_KEY_ENV`].
    pub fn from_env(config: HttpConfig) -> Result<Self, LlmError> {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::new(config, key)
    }

    fn body(request: &ChatRequest) -> serde_json::Value {
        json!({
            "model": request.model_id,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        })
    }

    fn attempt(&self, request: &ChatRequest) -> Attempt<ChatResponse, LlmError> {
        let started = Instant::now();
        let mut builder = self.client.post(&self.config.endpoint).json(&Self::body(request));
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = match builder.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry { error: LlmError::Transport(e.to_string()), retry_after: None },
        };
        let status = resp.status();
        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            let text = resp.text().unwrap_or_default();
            return Attempt::Fatal(LlmError::Auth(format!("{status}: {}", truncate(&text, 200))));
        }
        if status == StatusCode::TOO_MANY_REQUESTS {
            let retry_after = resp
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            return Attempt::Retry { error: LlmError::RateLimited { attempts: 0 }, retry_after };
        }
        if status.is_server_error() {
            return Attempt::Retry { error: LlmError::Transport(format!("server error {status}")), retry_after: None };
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Attempt::Fatal(LlmError::BadResponse(format!("{status}: {}", truncate(&text, 200))));
        }
        let value: serde_json::Value = match resp.json() {
            Ok(v) => v,
            Err(e) => return Attempt::Retry { error: LlmError::Transport(e.to_string()), retry_after: None },
        };
        match parse_completion(&value) {
            Ok(mut r) => {
                r.latency_ms = started.elapsed().as_millis() as u64;
                Attempt::Done(r)
            }
            Err(e) => Attempt::Fatal(e),
        }
    }
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

fn parse_completion(value: &serde_json::Value) -> Result<ChatResponse, LlmError> {
    let choice = value
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| LlmError::BadResponse("no choices in response".into()))?;
    let finish_reason = choice.get("finish_reason").and_then(|f| f.as_str()).unwrap_or("stop").to_string();
    let content = choice.pointer("/message/content").and_then(|c| c.as_str()).map(str::to_string);
    let content = match (content, finish_reason.as_str()) {
        (Some(c), _) => c,
        (None, "stop") => return Err(LlmError::BadResponse("stop without content".into())),
        (None, _) => String::new(),
    };
    let usage = value
        .get("usage")
        .map(|u| Usage {
            prompt_tokens: u.get("prompt_tokens").and_then(|v| v.as_u64()).unwrap_or(0),
            completion_tokens: u.get("completion_tokens").and_then(|v| v.as_u64()).unwrap_or(0),
        })
        .unwrap_or_default();
    Ok(ChatResponse { content, finish_reason, usage, latency_ms: 0, attempts: 1 })
}

impl Backend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        match self.config.retry.run(|_| self.attempt(request)) {
            Ok((mut r, attempts)) => {
                r.attempts = attempts;
                Ok(r)
            }
            Err((LlmError::RateLimited { .. }, attempts)) => Err(LlmError::RateLimited { attempts }),
            Err((e, _)) => Err(e),
        }
    }

    fn is_remote(&self) -> bool {
        true
    }
}
