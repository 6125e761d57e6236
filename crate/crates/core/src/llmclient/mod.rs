//! Chat-completion client.
//!
//! Requests follow the common hosted chat-completion shape: a JSON body of
//! `{model, messages: [{role, content}], temperature, max_tokens}` POSTed to
//! `{base_url}/chat/completions`, answered with
//! `{choices: [{message: {content}}]}`.
//!
//! The wire is abstracted behind [`Transport`] so every test can run against
//! [`StubTransport`] without network access.

mod http;
mod stub;

pub use http::HttpTransport;
pub use stub::{StubReply, StubTransport};

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

pub const ENV_API_KEY: &str = "LLM_API_KEY";
pub const ENV_BASE_URL: &str = "LLM_BASE_URL";
pub const ENV_MODEL: &str = "LLM_MODEL";

/// API key wrapper that never prints its contents.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub base_url: String,
    #[serde(skip)]
    pub api_key: Option<Secret>,
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub request_timeout_secs: u64,
    pub max_retries: u32,
    /// First retry delay; each further retry doubles it.
    pub backoff_base_ms: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.groq.com/openai/v1".into(),
            api_key: None,
            model_name: "llama3-70b-8192".into(),
            temperature: 0.2,
            max_tokens: 1024,
            request_timeout_secs: 30,
            max_retries: 2,
            backoff_base_ms: 1000,
        }
    }
}

impl LlmConfig {
    /// Defaults overridden by `LLM_API_KEY`, `LLM_BASE_URL` and `LLM_MODEL`.
    pub fn from_env() -> Self {
        let mut config = Self::default();
        config.apply_env();
        config
    }

    pub fn apply_env(&mut self) {
        if let Ok(key) = std::env::var(ENV_API_KEY) {
            if !key.trim().is_empty() {
                self.api_key = Some(Secret::new(key.trim()));
            }
        }
        if let Ok(url) = std::env::var(ENV_BASE_URL) {
            if !url.trim().is_empty() {
                self.base_url = url.trim().to_string();
            }
        }
        if let Ok(model) = std::env::var(ENV_MODEL) {
            if !model.trim().is_empty() {
                self.model_name = model.trim().to_string();
            }
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.base_url.trim().is_empty() {
            return Err(LlmError::Config("base_url is empty".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::Config("temperature must be >= 0".into()));
        }
        Ok(())
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_secs(self.request_timeout_secs)
    }

    /// Delay before retry number `retry` (0-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        Duration::from_millis(self.backoff_base_ms.saturating_mul(1u64 << retry.min(20)))
    }
}

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
    pub fn new(role: Role, content: impl Into<String>) -> Result<Self, LlmError> {
        let content = content.into();
        if content.trim().is_empty() {
            return Err(LlmError::InvalidRequest("message content is empty".into()));
        }
        Ok(Self { role, content })
    }

    pub fn system(content: impl Into<String>) -> Result<Self, LlmError> {
        Self::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Result<Self, LlmError> {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Result<Self, LlmError> {
        Self::new(Role::Assistant, content)
    }
}

/// JSON request body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Decode(String),
}

impl TransportError {
    /// Worth retrying: timeouts, connection failures, 5xx and 429.
    pub fn is_transient(&self) -> bool {
        match self {
            TransportError::Timeout | TransportError::Connect(_) => true,
            TransportError::Status { status, .. } => *status >= 500 || *status == 429,
            TransportError::Decode(_) => false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("LLM configuration error: {0}")]
    Config(String),
    #[error("LLM transport failed after {attempts} attempt(s): {source}")]
    Transport {
        attempts: u32,
        #[source]
        source: TransportError,
    },
    #[error("LLM provider error: {0}")]
    Provider(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// Sends one request and returns the assistant text.
#[async_trait]
pub trait Transport: Send + Sync {
    async fn send(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// Immutable client; cheap to clone and safe to share.
#[derive(Clone)]
pub struct LlmClient {
    config: LlmConfig,
    transport: Arc<dyn Transport>,
}

impl fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LlmClient")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl LlmClient {
    pub fn new(config: LlmConfig, transport: Arc<dyn Transport>) -> Result<Self, LlmError> {
        config.validate()?;
        Ok(Self { config, transport })
    }

    /// Client over HTTP; requires an API key.
    pub fn http(config: LlmConfig) -> Result<Self, LlmError> {
        let transport = HttpTransport::new(&config)?;
        Self::new(config, Arc::new(transport))
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    /// Sends `messages` and returns the completion text.
    ///
    /// Transient failures are retried up to `max_retries` times with
    /// exponential backoff; other 4xx responses fail immediately as
    /// configuration errors.
    pub async fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        match messages.first() {
            None => return Err(LlmError::InvalidRequest("no messages".into())),
            Some(m) if m.role != Role::System => {
                return Err(LlmError::InvalidRequest(
                    "first message must be the system prompt".into(),
                ))
            }
            _ => {}
        }
        let request = ChatRequest {
            model: self.config.model_name.clone(),
            messages: messages.to_vec(),
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        };
        let mut attempt: u32 = 0;
        loop {
            attempt += 1;
            tracing::debug!(model = %request.model, attempt, messages = request.messages.len(), "sending completion request");
            match self.transport.send(&request).await {
                Ok(text) if text.trim().is_empty() => {
                    return Err(LlmError::Provider("empty completion".into()));
                }
                Ok(text) => return Ok(text),
                Err(TransportError::Status { status, body }) if (400..500).contains(&status) && status != 429 => {
                    tracing::warn!(status, "LLM request rejected");
                    return Err(LlmError::Config(format!(
                        "provider rejected request with HTTP {status}: {body}"
                    )));
                }
                Err(e) if e.is_transient() && attempt <= self.config.max_retries => {
                    let delay = self.config.backoff(attempt - 1);
                    tracing::warn!(attempt, error = %e, delay_ms = delay.as_millis() as u64, "transient LLM failure, retrying");
                    tokio::time::sleep(delay).await;
                }
                Err(source) => {
                    return Err(LlmError::Transport {
                        attempts: attempt,
                        source,
                    })
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast_config() -> LlmConfig {
        LlmConfig {
            backoff_base_ms: 1,
            api_key: Some(Secret::new("sk-test-abcdef123456")),
            ..LlmConfig::default()
        }
    }

    fn messages() -> Vec<ChatMessage> {
        vec![
            ChatMessage::system("You are careful.").unwrap(),
            ChatMessage::user("What is a nevus?").unwrap(),
        ]
    }

    #[tokio::test]
    async fn echo_returns_last_user_message() {
        let stub = Arc::new(StubTransport::echo());
        let client = LlmClient::new(fast_config(), stub.clone()).unwrap();
        assert_eq!(client.complete(&messages()).await.unwrap(), "What is a nevus?");
        assert_eq!(stub.attempts(), 1);
        let sent = &stub.requests()[0];
        assert_eq!(sent.temperature, 0.2);
        assert_eq!(sent.messages.len(), 2);
    }

    #[tokio::test]
    async fn retries_transient_failures() {
        let stub = Arc::new(StubTransport::scripted(
            vec![
                StubReply::Fail(TransportError::Timeout),
                StubReply::Fail(TransportError::Status {
                    status: 503,
                    body: "busy".into(),
                }),
            ],
            StubReply::Text("ok".into()),
        ));
        let client = LlmClient::new(fast_config(), stub.clone()).unwrap();
        assert_eq!(client.complete(&messages()).await.unwrap(), "ok");
        assert_eq!(stub.attempts(), 3);
    }

    #[tokio::test]
    async fn gives_up_after_max_retries() {
        let stub = Arc::new(StubTransport::scripted(
            vec![],
            StubReply::Fail(TransportError::Timeout),
        ));
        let client = LlmClient::new(fast_config(), stub.clone()).unwrap();
        match client.complete(&messages()).await {
            Err(LlmError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(stub.attempts(), 3);
    }

    #[tokio::test]
    async fn unauthorized_is_config_error_without_retry() {
        let stub = Arc::new(StubTransport::scripted(
            vec![],
            StubReply::Fail(TransportError::Status {
                status: 401,
                body: "invalid key".into(),
            }),
        ));
        let client = LlmClient::new(fast_config(), stub.clone()).unwrap();
        assert!(matches!(client.complete(&messages()).await, Err(LlmError::Config(_))));
        assert_eq!(stub.attempts(), 1);
    }

    #[tokio::test]
    async fn empty_completion_is_provider_error() {
        let stub = Arc::new(StubTransport::fixed("   "));
        let client = LlmClient::new(fast_config(), stub).unwrap();
        assert!(matches!(client.complete(&messages()).await, Err(LlmError::Provider(_))));
    }

    #[tokio::test]
    async fn system_prompt_must_lead() {
        let client = LlmClient::new(fast_config(), Arc::new(StubTransport::echo())).unwrap();
        let only_user = vec![ChatMessage::user("hi").unwrap()];
        assert!(matches!(
            client.complete(&only_user).await,
            Err(LlmError::InvalidRequest(_))
        ));
        assert!(matches!(client.complete(&[]).await, Err(LlmError::InvalidRequest(_))));
    }

    #[test]
    fn backoff_doubles() {
        let config = LlmConfig::default();
        assert_eq!(config.backoff(0), Duration::from_secs(1));
        assert_eq!(config.backoff(1), Duration::from_secs(2));
        assert_eq!(config.backoff(2), Duration::from_secs(4));
    }

    #[test]
    fn empty_message_rejected() {
        assert!(ChatMessage::user("  ").is_err());
        assert!(LlmConfig {
            base_url: "".into(),
            ..LlmConfig::default()
        }
        .validate()
        .is_err());
    }
}
