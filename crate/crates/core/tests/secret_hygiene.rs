//! The API key must never appear in serialized config, debug output or logs.

use std::io::Write;
use std::sync::{Arc, Mutex};

use dermtriage_core::llmclient::{
    HttpTransport, LlmClient, LlmConfig, Secret, StubReply, StubTransport, TransportError,
};
use dermtriage_core::ChatMessage;

const KEY: &str = "sk-very-secret-0123456789abcdef";

#[derive(Clone, Default)]
struct Capture(Arc<Mutex<Vec<u8>>>);

impl Write for Capture {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

fn config() -> LlmConfig {
    LlmConfig {
        api_key: Some(Secret::new(KEY)),
        backoff_base_ms: 1,
        ..LlmConfig::default()
    }
}

#[test]
fn config_serialization_and_debug_hide_key() {
    let cfg = config();
    assert!(!serde_json::to_string(&cfg).unwrap().contains(KEY));
    assert!(!toml::to_string(&cfg).unwrap().contains(KEY));
    assert!(!format!("{cfg:?}").contains(KEY));
    assert!(!format!("{:?}", HttpTransport::new(&cfg).unwrap()).contains(KEY));
    assert!(!format!("{:?}", LlmClient::http(cfg).unwrap()).contains(KEY));
}

#[tokio::test]
async fn logs_hide_key() {
    let capture = Capture::default();
    let writer = capture.clone();
    let subscriber = tracing_subscriber::fmt()
        .with_max_level(tracing::Level::TRACE)
        .with_writer(move || writer.clone())
        .finish();
    let _guard = tracing::subscriber::set_default(subscriber);

    let stub = Arc::new(StubTransport::scripted(
        vec![
            StubReply::Fail(TransportError::Status {
                status: 503,
                body: "busy".into(),
            }),
            StubReply::Fail(TransportError::Timeout),
        ],
        StubReply::Text("fine".into()),
    ));
    let client = LlmClient::new(config(), stub).unwrap();
    tracing::info!(config = ?client.config(), "client ready");
    let reply = client
        .complete(&[ChatMessage::system("s").unwrap(), ChatMessage::user("q").unwrap()])
        .await
        .unwrap();
    assert_eq!(reply, "fine");

    let logs = String::from_utf8(capture.0.lock().unwrap().clone()).unwrap();
    assert!(logs.contains("retrying"), "expected retry logs, got: {logs}");
    assert!(!logs.contains(KEY));
}
