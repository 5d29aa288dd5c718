use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use relgraph_cli::{run, Cli, CliError, Command};
use relgraph_core::config::AppConfig;
use relgraph_service::AppState;
use serde_json::json;
use tracing_subscriber::EnvFilter;

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::FAILURE
}

fn serve(config: Option<&std::path::Path>) -> Result<(), CliError> {
    let cfg = AppConfig::load(config)?;
    let state = AppState::from_config(cfg)?;
    let rt = tokio::runtime::Runtime::new().map_err(|source| CliError::Io {
        path: "tokio runtime".into(),
        source,
    })?;
    rt.block_on(relgraph_service::serve(state))
        .map_err(|source| CliError::Io {
            path: "listener".into(),
            source,
        })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ");
            eprintln!(
                "{}",
                json!({ "error": { "kind": "usage", "message": first } })
            );
            return ExitCode::from(2);
        }
    };
    tracing_subscriber::fmt()
        .json()
        .with_writer(std::io::stderr)
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")),
        )
        .init();

    if let Command::Serve { config } = &cli.command {
        return match serve(config.as_deref()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(&e),
        };
    }
    match run(cli.command) {
        Ok(out) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&out.json).expect("json value serializes")
            );
            if out.ok {
                ExitCode::SUCCESS
            } else {
                eprintln!(
                    "{}",
                    json!({ "error": { "kind": "check", "message": "check failed; see stdout" } })
                );
                ExitCode::FAILURE
            }
        }
        Err(e) => fail(&e),
    }
}
