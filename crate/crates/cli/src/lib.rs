//! The `relgraph` command line.
//!
//! Every subcommand writes exactly one JSON document to stdout. Logs go to
//! stderr, and a failure prints a single JSON line there.

pub mod error;
pub mod pipeline;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use relgraph_core::config::{build_embedder, build_provider, AppConfig};
use relgraph_core::engine::{apply_ops, plan_completion, CompletionOp};
use relgraph_core::kb::{load_kb, validate_kb, Severity};
use relgraph_core::metrics::{
    run_logic_benchmark, score_graphs, small_world_index, LogicBenchItem,
};
use relgraph_core::{Document, Graph, GraphDocument, RuleKb};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "relgraph",
    version,
    about = "Relation graph annotation toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract, reason and export a graph for one document.
    Pipeline {
        doc: PathBuf,
        /// KB file; the bundled starter KB when omitted.
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Let the provider pick a side of every conflict and apply it.
        #[arg(long)]
        auto_resolve: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score a predicted graph against a gold graph.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Credit predicted subtypes of gold relations.
        #[arg(long)]
        soft_hierarchy: bool,
        /// KB supplying the hierarchy; the starter KB when omitted.
        #[arg(long)]
        kb: Option<PathBuf>,
    },
    /// Run the logic benchmark against a provider.
    LogicBench {
        items: PathBuf,
        /// Config file whose provider section is used.
        #[arg(long)]
        provider: Option<PathBuf>,
    },
    /// Small-world statistics of a graph.
    Swi {
        graph: PathBuf,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Knowledge base tools.
    Kb {
        #[command(subcommand)]
        command: KbCommand,
    },
    /// Operations that turn one graph into another.
    Plan {
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        to: PathBuf,
        #[arg(long)]
        kb: Option<PathBuf>,
    },
    /// Replay an operation sequence on a graph.
    Apply {
        #[arg(long)]
        graph: PathBuf,
        /// A plan document or a bare list of operations.
        #[arg(long)]
        ops: PathBuf,
        #[arg(long)]
        kb: Option<PathBuf>,
    },
    /// Run the HTTP service until interrupted.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum KbCommand {
    /// Report diagnostics; fails when there are hard errors.
    Validate { kb: PathBuf },
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn read_graph(path: &Path) -> Result<Graph, CliError> {
    let doc: GraphDocument = read_json(path)?;
    Ok(doc.into_graph()?)
}

/// Loads a KB file (or the starter KB) and refuses hard errors.
pub fn read_kb(path: Option<&Path>) -> Result<RuleKb, CliError> {
    let kb = match path {
        Some(p) => load_kb(&read(p)?)?,
        None => RuleKb::starter(),
    };
    let hard: Vec<_> = validate_kb(&kb)
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .collect();
    if hard.is_empty() {
        Ok(kb)
    } else {
        Err(CliError::KbHardErrors(hard))
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn doc_id(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("doc");
    stem.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

/// The outcome of a command: the stdout document and whether it counts as
/// success.
pub struct Output {
    pub json: Value,
    pub ok: bool,
}

impl From<Value> for Output {
    fn from(json: Value) -> Self {
        Output { json, ok: true }
    }
}

/// Runs everything except `serve`, which needs the async runtime.
pub fn run(cmd: Command) -> Result<Output, CliError> {
    match cmd {
        Command::Pipeline {
            doc,
            kb,
            out,
            auto_resolve,
            config,
        } => {
            let cfg = AppConfig::load(config.as_deref())?;
            let kb = read_kb(kb.as_deref())?;
            let provider = build_provider(&cfg.provider)?;
            let embedder = build_embedder(&cfg.embedder)?;
            let document = Document::new(doc_id(&doc), read(&doc)?);
            let (g, report) = pipeline::run_pipeline(
                &document,
                &kb,
                &cfg,
                provider.as_ref(),
                embedder.as_ref(),
                auto_resolve,
            )?;
            write(&out, &GraphDocument::annotated(&g, &kb).to_json_pretty())?;
            let mut json = serde_json::to_value(&report).expect("report serializes");
            json["out"] = json!(out);
            Ok(json.into())
        }
        Command::Eval {
            pred,
            gold,
            soft_hierarchy,
            kb,
        } => {
            let kb = if soft_hierarchy {
                Some(read_kb(kb.as_deref())?)
            } else {
                None
            };
            let report = score_graphs(&read_graph(&pred)?, &read_graph(&gold)?, kb.as_ref());
            Ok(json!(report).into())
        }
        Command::LogicBench { items, provider } => {
            let cfg = AppConfig::load(provider.as_deref())?;
            let p = build_provider(&cfg.provider)?;
            let items = LogicBenchItem::read_jsonl(&read(&items)?)?;
            Ok(json!(run_logic_benchmark(&items, p.as_ref())).into())
        }
        Command::Swi {
            graph,
            samples,
            seed,
        } => {
            let g = read_graph(&graph)?;
            Ok(json!(small_world_index(&g, samples as usize, seed)).into())
        }
        Command::Kb {
            command: KbCommand::Validate { kb },
        } => {
            let kb = load_kb(&read(&kb)?)?;
            let diagnostics = validate_kb(&kb);
            let errors = diagnostics
                .iter()
                .filter(|d| d.severity == Severity::Error)
                .count();
            Ok(Output {
                json: json!({
                    "relations": kb.relation_count(),
                    "rules": kb.rule_count(),
                    "errors": errors,
                    "warnings": diagnostics.len() - errors,
                    "diagnostics": diagnostics,
                }),
                ok: errors == 0,
            })
        }
        Command::Plan { from, to, kb } => {
            let kb = read_kb(kb.as_deref())?;
            let plan = plan_completion(&read_graph(&from)?, &read_graph(&to)?, &kb)?;
            Ok(json!(plan).into())
        }
        Command::Apply { graph, ops, kb } => {
            let kb = read_kb(kb.as_deref())?;
            let g = read_graph(&graph)?;
            let ops = read_ops(&ops)?;
            let outcome = apply_ops(&g, &ops, &kb);
            let ok = outcome.error.is_none();
            Ok(Output {
                json: json!({
                    "applied": outcome.applied,
                    "error": outcome.error,
                    "graph": GraphDocument::from_graph(&outcome.graph),
                }),
                ok,
            })
        }
        Command::Serve { .. } => Err(CliError::Invalid("serve runs on the async runtime".into())),
    }
}

/// Accepts either `{"ops": [...]}` (as printed by `plan`) or a bare list.
fn read_ops(path: &Path) -> Result<Vec<CompletionOp>, CliError> {
    let v: Value = read_json(path)?;
    let list = match v {
        Value::Object(mut m) => m.remove("ops").unwrap_or(Value::Null),
        other => other,
    };
    serde_json::from_value(list).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
