use std::collections::VecDeque;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use async_trait::async_trait;

use super::{ChatRequest, Role, Transport, TransportError};

/// Canned behaviour for one stub attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StubReply {
    Text(String),
    /// Returns the content of the last user message.
    EchoLastUser,
    Fail(TransportError),
}

/// In-memory transport for tests and offline runs.
///
/// Scripted replies are consumed in order; once exhausted every attempt gets
/// the default reply. Attempts and requests are recorded.
#[derive(Debug)]
pub struct StubTransport {
    script: Mutex<VecDeque<StubReply>>,
    default: StubReply,
    attempts: AtomicUsize,
    requests: Mutex<Vec<ChatRequest>>,
}

impl StubTransport {
    pub fn scripted(script: Vec<StubReply>, default: StubReply) -> Self {
        Self {
            script: Mutex::new(script.into()),
            default,
            attempts: AtomicUsize::new(0),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn echo() -> Self {
        Self::scripted(Vec::new(), StubReply::EchoLastUser)
    }

    pub fn fixed(text: impl Into<String>) -> Self {
        Self::scripted(Vec::new(), StubReply::Text(text.into()))
    }

    /// Always answers with the contents of a fixture file.
    pub fn from_fixture(path: &Path) -> std::io::Result<Self> {
        Ok(Self::fixed(std::fs::read_to_string(path)?))
    }

    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().expect("stub lock").clone()
    }
}

#[async_trait]
impl Transport for StubTransport {
    async fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.attempts.fetch_add(1, Ordering::SeqCst);
        self.requests.lock().expect("stub lock").push(request.clone());
        let reply = self
            .script
            .lock()
            .expect("stub lock")
            .pop_front()
            .unwrap_or_else(|| self.default.clone());
        match reply {
            StubReply::Text(t) => Ok(t),
            StubReply::EchoLastUser => Ok(request
                .messages
                .iter()
                .rev()
                .find(|m| m.role == Role::User)
                .map(|m| m.content.clone())
                .unwrap_or_default()),
            StubReply::Fail(e) => Err(e),
        }
    }
}
