//! Shared configuration for the service and the command-line tool.
//!
//! TOML file, every section optional, then environment overrides:
//!
//! | variable | field |
//! |---|---|
//! | `RELGRAPH_HOST` | `server.host` |
//! | `RELGRAPH_PORT` | `server.port` |
//! | `RELGRAPH_DATA_DIR` | `server.data_dir` |
//! | `RELGRAPH_DEFAULT_KB` | `server.default_kb` |
//! | `RELGRAPH_PROVIDER_URL` | `provider.base_url` (and `kind = "http"`) |
//! | `RELGRAPH_PROVIDER_MODEL` | `provider.model` |
//! | `RELGRAPH_PROVIDER_KEY` | `provider.api_key` |
//! | `RELGRAPH_EMBEDDER_URL` | `embedder.base_url` (and `kind = "http"`) |
//! | `RELGRAPH_EMBEDDER_KEY` | `embedder.api_key` |

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::ExtractionConfig;
use crate::provider::{NoProvider, Provider, ScriptedProvider};
use crate::retrieve::{Embedder, HashEmbedder, RetrievalConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid value for {var}: {value:?}")]
    Env { var: &'static str, value: String },
    #[error("{0} backend needs the `http` feature")]
    HttpDisabled(&'static str),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    pub data_dir: PathBuf,
    pub default_kb: Option<PathBuf>,
    /// Upper bound for long-poll waits.
    pub long_poll_secs: u64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            data_dir: PathBuf::from("data"),
            default_kb: None,
            long_poll_secs: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    None,
    Http,
    /// Replays `responses` in order.
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub base_url: Option<String>,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout_secs: u64,
    pub responses: Vec<String>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderKind::None,
            base_url: None,
            model: "default".into(),
            api_key: None,
            timeout_secs: 120,
            responses: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    #[default]
    Hash,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    pub dim: usize,
    pub base_url: Option<String>,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout_secs: u64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            kind: EmbedderKind::Hash,
            dim: 256,
            base_url: None,
            model: "default".into(),
            api_key: None,
            timeout_secs: 60,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub server: ServerConfig,
    pub provider: ProviderConfig,
    pub embedder: EmbedderConfig,
    pub extraction: ExtractionConfig,
    pub retrieval: RetrievalConfig,
}

impl AppConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: AppConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (defaults when `None`) and applies the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                AppConfig::from_toml(&text)?
            }
            None => AppConfig::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = var("RELGRAPH_HOST") {
            self.server.host = v;
        }
        if let Some(v) = var("RELGRAPH_PORT") {
            self.server.port = v.parse().map_err(|_| ConfigError::Env {
                var: "RELGRAPH_PORT",
                value: v,
            })?;
        }
        if let Some(v) = var("RELGRAPH_DATA_DIR") {
            self.server.data_dir = v.into();
        }
        if let Some(v) = var("RELGRAPH_DEFAULT_KB") {
            self.server.default_kb = Some(v.into());
        }
        if let Some(v) = var("RELGRAPH_PROVIDER_URL") {
            self.provider.kind = ProviderKind::Http;
            self.provider.base_url = Some(v);
        }
        if let Some(v) = var("RELGRAPH_PROVIDER_MODEL") {
            self.provider.model = v;
        }
        if let Some(v) = var("RELGRAPH_PROVIDER_KEY") {
            self.provider.api_key = Some(v);
        }
        if let Some(v) = var("RELGRAPH_EMBEDDER_URL") {
            self.embedder.kind = EmbedderKind::Http;
            self.embedder.base_url = Some(v);
        }
        if let Some(v) = var("RELGRAPH_EMBEDDER_KEY") {
            self.embedder.api_key = Some(v);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.extraction
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let r = &self.retrieval;
        if r.chunk_chars == 0 || r.overlap_chars >= r.chunk_chars || r.k == 0 {
            return Err(ConfigError::Invalid(
                "retrieval needs 0 <= overlap_chars < chunk_chars and k >= 1".into(),
            ));
        }
        if self.embedder.dim == 0 {
            return Err(ConfigError::Invalid("embedder.dim must be positive".into()));
        }
        if self.provider.kind == ProviderKind::Http && self.provider.base_url.is_none() {
            return Err(ConfigError::Invalid("provider.base_url is required".into()));
        }
        if self.embedder.kind == EmbedderKind::Http && self.embedder.base_url.is_none() {
            return Err(ConfigError::Invalid("embedder.base_url is required".into()));
        }
        Ok(())
    }
}

pub fn build_provider(cfg: &ProviderConfig) -> Result<Arc<dyn Provider>, ConfigError> {
    match cfg.kind {
        ProviderKind::None => Ok(Arc::new(NoProvider)),
        ProviderKind::Scripted => Ok(Arc::new(ScriptedProvider::new(cfg.responses.clone()))),
        ProviderKind::Http => http_provider(cfg),
    }
}

#[cfg(feature = "http")]
fn http_provider(cfg: &ProviderConfig) -> Result<Arc<dyn Provider>, ConfigError> {
    let url = cfg
        .base_url
        .as_deref()
        .ok_or_else(|| ConfigError::Invalid("provider.base_url is required".into()))?;
    let p = crate::provider::HttpProvider::new(
        url,
        &cfg.model,
        cfg.api_key.clone(),
        std::time::Duration::from_secs(cfg.timeout_secs),
    )
    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(Arc::new(p))
}

#[cfg(not(feature = "http"))]
fn http_provider(_: &ProviderConfig) -> Result<Arc<dyn Provider>, ConfigError> {
    Err(ConfigError::HttpDisabled("provider"))
}

pub fn build_embedder(cfg: &EmbedderConfig) -> Result<Arc<dyn Embedder>, ConfigError> {
    match cfg.kind {
        EmbedderKind::Hash => Ok(Arc::new(HashEmbedder::new(cfg.dim))),
        EmbedderKind::Http => http_embedder(cfg),
    }
}

#[cfg(feature = "http")]
fn http_embedder(cfg: &EmbedderConfig) -> Result<Arc<dyn Embedder>, ConfigError> {
    let url = cfg
        .base_url
        .as_deref()
        .ok_or_else(|| ConfigError::Invalid("embedder.base_url is required".into()))?;
    let e = crate::retrieve::HttpEmbedder::new(
        url,
        &cfg.model,
        cfg.api_key.clone(),
        cfg.dim,
        std::time::Duration::from_secs(cfg.timeout_secs),
    )
    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(Arc::new(e))
}

#[cfg(not(feature = "http"))]
fn http_embedder(_: &EmbedderConfig) -> Result<Arc<dyn Embedder>, ConfigError> {
    Err(ConfigError::HttpDisabled("embedder"))
}
