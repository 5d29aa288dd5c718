use std::path::PathBuf;

use relgraph_core::config::ConfigError;
use relgraph_core::engine::EngineError;
use relgraph_core::extract::ExtractError;
use relgraph_core::graph::GraphError;
use relgraph_core::kb::{Diagnostic, KbError};
use relgraph_core::metrics::BenchError;
use relgraph_core::retrieve::{ResolveError, RetrieveError};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("knowledge base has {} hard error(s)", .0.len())]
    KbHardErrors(Vec<Diagnostic>),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Retrieve(#[from] RetrieveError),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Config(_) => "config",
            CliError::Kb(_) | CliError::KbHardErrors(_) => "kb",
            CliError::Graph(_) => "graph",
            CliError::Engine(_) => "engine",
            CliError::Extract(_) => "extract",
            CliError::Retrieve(_) => "retrieve",
            CliError::Resolve(_) => "resolve",
            CliError::Bench(_) => "bench",
            CliError::Invalid(_) => "invalid",
        }
    }

    /// The single stderr line for this error.
    pub fn to_json(&self) -> Value {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
    }
}
