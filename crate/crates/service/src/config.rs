use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use dermtriage_core::inference::{load_roster, BackendDescriptor};
use dermtriage_core::reporting::ChatSettings;
use dermtriage_core::{LlmConfig, PreprocessConfig};
use serde::{Deserialize, Serialize};

use crate::ServiceError;

pub const ENV_LISTEN: &str = "DERMTRIAGE_LISTEN";
pub const ENV_DATA_DIR: &str = "DERMTRIAGE_DATA_DIR";
pub const ENV_ROSTER: &str = "DERMTRIAGE_ROSTER";

/// Service settings, read from TOML.
///
/// ```toml
/// listen_address = "127.0.0.1:8080"
/// data_dir = "data"
/// roster = "backends.toml"     # or inline [[backend]] tables
///
/// [llm]
/// model_name = "llama3-70b-8192"
///
/// [preprocess]
/// denoise = true
/// ```
///
/// Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen_address: SocketAddr,
    pub data_dir: PathBuf,
    pub roster: Option<PathBuf>,
    #[serde(rename = "backend")]
    pub backends: Vec<BackendDescriptor>,
    pub max_upload_bytes: usize,
    /// Upper bound on LLM requests in flight across all cases.
    pub llm_concurrency: usize,
    pub llm: LlmConfig,
    pub preprocess: PreprocessConfig,
    pub chat: ChatSettings,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen_address: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: PathBuf::from("data"),
            roster: None,
            backends: Vec::new(),
            max_upload_bytes: 10 * 1024 * 1024,
            llm_concurrency: 4,
            llm: LlmConfig::default(),
            preprocess: PreprocessConfig::default(),
            chat: ChatSettings::default(),
        }
    }
}

impl ServiceConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ServiceError> {
        let mut config: Self =
            toml::from_str(text).map_err(|e| ServiceError::Config(format!("service config: {e}")))?;
        config.resolve_paths(base_dir);
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        abs(&mut self.data_dir);
        if let Some(r) = self.roster.as_mut() {
            abs(r);
        }
        for b in &mut self.backends {
            abs(&mut b.source);
        }
    }

    /// Applies `DERMTRIAGE_*` and `LLM_*` environment overrides.
    pub fn apply_env(&mut self) -> Result<(), ServiceError> {
        if let Ok(addr) = std::env::var(ENV_LISTEN) {
            self.listen_address = addr
                .parse()
                .map_err(|e| ServiceError::Config(format!("{ENV_LISTEN}={addr}: {e}")))?;
        }
        if let Some(dir) = std::env::var_os(ENV_DATA_DIR) {
            self.data_dir = PathBuf::from(dir);
        }
        if let Some(roster) = std::env::var_os(ENV_ROSTER) {
            self.roster = Some(PathBuf::from(roster));
        }
        self.llm.apply_env();
        Ok(())
    }

    /// Inline backends followed by those from the roster file.
    pub fn backend_descriptors(&self) -> Result<Vec<BackendDescriptor>, ServiceError> {
        let mut all = self.backends.clone();
        if let Some(path) = &self.roster {
            all.extend(load_roster(path)?);
        }
        let n = all.len();
        if n < 3 || n % 2 == 0 {
            return Err(ServiceError::Config(format!(
                "the backend roster needs an odd number of at least 3 backends, found {n}"
            )));
        }
        Ok(all)
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.max_upload_bytes == 0 {
            return Err(ServiceError::Config("max_upload_bytes must be positive".into()));
        }
        if self.llm_concurrency == 0 {
            return Err(ServiceError::Config("llm_concurrency must be positive".into()));
        }
        self.preprocess
            .nlm
            .validate()
            .map_err(|e| ServiceError::Config(e.to_string()))?;
        Ok(())
    }
}
