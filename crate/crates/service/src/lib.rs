//! HTTP service for lesion triage cases.
//!
//! Endpoints, all JSON and under `/v1`:
//!
//! | method | path                    | purpose                                   |
//! |--------|-------------------------|-------------------------------------------|
//! | GET    | `/health`               | liveness and loaded backends              |
//! | POST   | `/cases`                | upload an image (raw body or multipart)   |
//! | GET    | `/cases?status=...`     | list cases, newest first                  |
//! | GET    | `/cases/{id}`           | fetch one case                            |
//! | POST   | `/cases/{id}/report`    | generate or fetch the report (`?force=true` regenerates) |
//! | POST   | `/cases/{id}/chat`      | `{"query": "..."}` patient question       |
//! | POST   | `/evaluate`             | prediction file in, metrics report out    |

mod api;
mod config;
mod record;
mod store;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::Router;
use dermtriage_core::inference::{load_backends, Classifier, InferenceError};
use dermtriage_core::llmclient::LlmError;
use dermtriage_core::{LlmClient, VotingPolicy};
use tokio::sync::Semaphore;
use uuid::Uuid;

pub use config::{ServiceConfig, ENV_DATA_DIR, ENV_LISTEN, ENV_ROSTER};
pub use record::{CaseRecord, CaseStatus};
pub use store::{write_atomic, CaseStore};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("storage error: {0}")]
    Storage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

/// Shared state behind every handler.
pub struct AppState {
    config: ServiceConfig,
    store: CaseStore,
    backends: Vec<Box<dyn Classifier>>,
    policy: VotingPolicy,
    llm: Option<LlmClient>,
    llm_permits: Semaphore,
    case_locks: Mutex<HashMap<Uuid, Arc<tokio::sync::Mutex<()>>>>,
}

impl std::fmt::Debug for AppState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AppState")
            .field("data_dir", &self.store.root())
            .field(
                "backends",
                &self.backends.iter().map(|b| b.model_id()).collect::<Vec<_>>(),
            )
            .field("llm", &self.llm.is_some())
            .finish_non_exhaustive()
    }
}

impl AppState {
    /// Loads backends and opens the case store.
    ///
    /// `llm` is `None` when no provider is configured; report and chat
    /// requests then fail with 503.
    pub fn new(config: ServiceConfig, llm: Option<LlmClient>) -> Result<Self, ServiceError> {
        config.validate()?;
        let descriptors = config.backend_descriptors()?;
        let backends = load_backends(&descriptors)?;
        let policy = VotingPolicy::new(backends.len()).map_err(|e| ServiceError::Config(e.to_string()))?;
        let store = CaseStore::open(&config.data_dir)?;
        Ok(Self {
            llm_permits: Semaphore::new(config.llm_concurrency),
            config,
            store,
            backends,
            policy,
            llm,
            case_locks: Mutex::new(HashMap::new()),
        })
    }

    /// Builds the LLM client from `config.llm` when an API key is set.
    pub fn from_config(config: ServiceConfig) -> Result<Self, ServiceError> {
        let llm = match config.llm.api_key {
            Some(_) => Some(LlmClient::http(config.llm.clone())?),
            None => None,
        };
        Self::new(config, llm)
    }

    pub fn store(&self) -> &CaseStore {
        &self.store
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn case_lock(&self, id: Uuid) -> Arc<tokio::sync::Mutex<()>> {
        self.case_locks
            .lock()
            .expect("case lock table")
            .entry(id)
            .or_default()
            .clone()
    }
}

/// The `/v1` router.
pub fn router(state: Arc<AppState>) -> Router {
    api::routes(state)
}

/// Binds `config.listen_address` and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let addr = config.listen_address;
    let state = Arc::new(AppState::from_config(config)?);
    if state.llm.is_none() {
        tracing::warn!("no LLM API key configured; report and chat endpoints will answer 503");
    }
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(address = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
