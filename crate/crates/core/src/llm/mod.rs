//! Chat-completion gateway.
//!
//! All model calls go through [`Gateway`], which wraps a [`Backend`] (live
//! HTTP, transcript replay, or an in-process function for tests), bounds
//! the number of in-flight requests, enforces an optional per-minute token
//! budget and optionally records every exchange to a transcript.

mod finetune;
mod http;
pub mod json;
mod limits;
mod transcript;

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use finetune::{export_finetune_file, finetune_record, FineTuneRecord};
pub use http::{HttpBackend, HttpConfig, API_KEY_ENV};
pub use limits::{InFlightLimiter, TokenBudget};
pub use transcript::{read_transcript, verify_transcript, ReplayBackend, TranscriptEntry, TranscriptRecorder};

use crate::model::ids::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl ChatRequest {
    /// Deterministic request at temperature 0.
    pub fn new(model_id: impl Into<String>, messages: Vec<ChatMessage>, max_output_tokens: u32) -> Self {
        Self { model_id: model_id.into(), messages, temperature: 0.0, max_output_tokens }
    }

    /// Replay key: SHA-256 over model id, messages and temperature. Output
    /// limits, latency and usage do not participate.
    pub fn digest(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            model_id: &'a str,
            messages: &'a [ChatMessage],
            temperature: f64,
        }
        let key = Key { model_id: &self.model_id, messages: &self.messages, temperature: self.temperature };
        let bytes = serde_json::to_vec(&key).expect("request key serializes");
        sha256_hex(&bytes)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !self.messages.iter().any(|m| m.role == Role::User) {
            return Err(LlmError::InvalidRequest("request has no user message".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LlmError::InvalidRequest(format!("temperature {} must be >= 0", self.temperature)));
        }
        Ok(())
    }

    /// Rough size used by the token budget.
    pub fn estimated_tokens(&self) -> u64 {
        let prompt: usize = self.messages.iter().map(|m| crate::text::estimate_tokens(&m.content)).sum();
        prompt as u64 + u64::from(self.max_output_tokens)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub finish_reason: String,
    #[serde(default)]
    pub usage: Usage,
    #[serde(default)]
    pub latency_ms: u64,
    /// HTTP attempts spent obtaining this response (1 when no retry).
    #[serde(default = "one")]
    pub attempts: u32,
}

fn one() -> u32 {
    1
}

impl ChatResponse {
    pub fn stop(content: impl Into<String>) -> Self {
        Self { content: content.into(), finish_reason: "stop".into(), usage: Usage::default(), latency_ms: 0, attempts: 1 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request digest {0} not found in transcript")]
    ReplayMiss(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed provider response: {0}")]
    BadResponse(String),
    #[error("{path}: {message}")]
    Transcript { path: String, message: String },
    #[error("fine-tune export: split is empty")]
    EmptySplit,
    #[error("fine-tune export: {0}")]
    Export(String),
}

/// Something that answers chat requests.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;

    /// Remote backends are subject to the token budget.
    fn is_remote(&self) -> bool {
        false
    }
}

/// Backend answering from an in-process function; used for mocks and
/// fixture generation.
pub struct FnBackend<F>(pub F);

impl<F> Backend for FnBackend<F>
where
    F: Fn(&ChatRequest) -> Result<ChatResponse, LlmError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (self.0)(request)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub max_in_flight: usize,
    /// Per-minute token budget for remote backends; 0 disables it.
    pub tokens_per_minute: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self { max_in_flight: 4, tokens_per_minute: 0 }
    }
}

/// Thread-safe entry point for every model call.
pub struct Gateway {
    backend: Arc<dyn Backend>,
    in_flight: InFlightLimiter,
    budget: Option<TokenBudget>,
    recorder: Option<TranscriptRecorder>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>, config: &GatewayConfig) -> Self {
        let budget = (config.tokens_per_minute > 0 && backend.is_remote()).then(|| TokenBudget::per_minute(config.tokens_per_minute));
        Self { backend, in_flight: InFlightLimiter::new(config.max_in_flight), budget, recorder: None }
    }

    /// Gateway over a recorded transcript; never touches the network.
    pub fn replay(path: &Path) -> Result<Self, LlmError> {
        Ok(Self::new(Arc::new(ReplayBackend::load(path)?), &GatewayConfig::default()))
    }

    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&ChatRequest) -> Result<ChatResponse, LlmError> + Send + Sync + 'static,
    {
        Self::new(Arc::new(FnBackend(f)), &GatewayConfig::default())
    }

    /// Appends every successful exchange to `path`.
    pub fn with_recorder(mut self, path: &Path) -> Result<Self, LlmError> {
        self.recorder = Some(TranscriptRecorder::create(path)?);
        Ok(self)
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        if let Some(budget) = &self.budget {
            budget.acquire(request.estimated_tokens());
        }
        let response = {
            let _permit = self.in_flight.acquire();
            self.backend.complete(request)?
        };
        if let Some(rec) = &self.recorder {
            rec.append(request, &response)?;
        }
        Ok(response)
    }

    /// Peak number of concurrently running backend calls observed so far.
    pub fn peak_in_flight(&self) -> usize {
        self.in_flight.peak()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(text: &str) -> ChatRequest {
        ChatRequest::new("m", vec![ChatMessage::system("sys"), ChatMessage::user(text)], 4)
    }

    #[test]
    fn digest_ignores_output_limit() {
        let a = req("hello");
        let mut b = a.clone();
        b.max_output_tokens = 999;
        assert_eq!(a.digest(), b.digest());
        let mut c = a.clone();
        c.temperature = 0.7;
        assert_ne!(a.digest(), c.digest());
        assert_ne!(a.digest(), req("hello!").digest());
    }

    #[test]
    fn requires_user_message() {
        let r = ChatRequest::new("m", vec![ChatMessage::system("only system")], 4);
        let gw = Gateway::from_fn(|_| Ok(ChatResponse::stop("x")));
        assert!(matches!(gw.complete(&r), Err(LlmError::InvalidRequest(_))));
    }

    #[test]
    fn bounded_in_flight_under_parallel_load() {
        use std::time::Duration;
        let backend = Arc::new(FnBackend(|r: &ChatRequest| {
            std::thread::sleep(Duration::from_millis(5));
            Ok(ChatResponse::stop(r.messages[1].content.clone()))
        }));
        let gw = Gateway::new(backend, &GatewayConfig { max_in_flight: 3, tokens_per_minute: 0 });
        let inputs: Vec<String> = (0..24).map(|i| format!("q{i}")).collect();
        let out = crate::par::map(crate::par::Parallelism::Parallel, &inputs, |q| gw.complete(&req(q)).unwrap().content);
        assert_eq!(out, inputs);
        assert!(gw.peak_in_flight() <= 3);
    }
}
