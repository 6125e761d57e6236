#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use dermtriage_core::imaging::save_image;
use dermtriage_core::llmclient::StubTransport;
use dermtriage_core::{BackendDescriptor, LlmClient, LlmConfig, PixelImage};
use dermtriage_service::{router, AppState, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

/// Writes one mock table per entry and returns their descriptors.
///
/// Each entry is either a fixed `[p_nv, p_bcc]` or an error message.
pub fn mock_roster(dir: &Path, members: &[Result<[f64; 2], &str>]) -> Vec<BackendDescriptor> {
    members
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let id = format!("model_{i}");
            let path = dir.join(format!("{id}.toml"));
            let text = match m {
                Ok([nv, bcc]) => format!("fallback = [{nv}, {bcc}]\n"),
                Err(msg) => format!("error = \"{msg}\"\n"),
            };
            std::fs::write(&path, text).unwrap();
            BackendDescriptor::mock(id, path)
        })
        .collect()
}

pub fn config(data_dir: &Path, backends: Vec<BackendDescriptor>) -> ServiceConfig {
    let mut cfg = ServiceConfig {
        data_dir: data_dir.to_path_buf(),
        backends,
        ..ServiceConfig::default()
    };
    cfg.preprocess.width = 32;
    cfg.preprocess.height = 32;
    for b in &mut cfg.backends {
        b.input_shape.height = 32;
        b.input_shape.width = 32;
    }
    cfg
}

pub fn stub_client(stub: Arc<StubTransport>) -> LlmClient {
    let cfg = LlmConfig {
        backoff_base_ms: 1,
        ..LlmConfig::default()
    };
    LlmClient::new(cfg, stub).unwrap()
}

pub fn app(cfg: ServiceConfig, llm: Option<LlmClient>) -> Router {
    router(Arc::new(AppState::new(cfg, llm).unwrap()))
}

/// A small RGB gradient encoded as PNG.
pub fn png_bytes(dir: &Path, seed: usize) -> Vec<u8> {
    let img = PixelImage::from_fn(16, 12, 3, |x, y, c| ((x * 7 + y * 3 + c * 5 + seed) % 17) as f64 / 16.0).unwrap();
    let path: PathBuf = dir.join(format!("upload_{seed}.png"));
    save_image(&img, &path).unwrap();
    std::fs::read(path).unwrap()
}

pub async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

pub fn post(uri: &str, body: impl Into<Body>) -> Request<Body> {
    Request::post(uri).body(body.into()).unwrap()
}

pub fn post_json(uri: &str, body: &Value) -> Request<Body> {
    Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

pub fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

pub async fn upload(app: &Router, bytes: Vec<u8>) -> (StatusCode, Value) {
    send(app, post("/v1/cases", bytes)).await
}
