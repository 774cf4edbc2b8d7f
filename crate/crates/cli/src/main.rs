//! `mvembed` command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 data, 3 numeric. Failures print one
//! JSON object on a single stderr line.

use std::process::ExitCode;

use clap::Parser;
use mvembed::{Error, ErrorCategory};
use serde_json::json;

mod args;
mod commands;

use args::{Cli, Command, EvalCommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Usage => 1,
                ErrorCategory::Data => 2,
                ErrorCategory::Numeric => 3,
            },
        }
    }

    fn report(&self) -> String {
        let (kind, category, message) = match self {
            CliError::Usage(m) => ("usage", "usage", m.clone()),
            CliError::Core(e) => {
                let category = match e.category() {
                    ErrorCategory::Usage => "usage",
                    ErrorCategory::Data => "data",
                    ErrorCategory::Numeric => "numeric",
                };
                (e.kind(), category, e.to_string())
            }
        };
        json!({ "error": kind, "category": category, "message": message }).to_string()
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MVEMBED_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "MVEMBED_THREADS must be a positive integer, got '{raw}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Fit(a) => commands::fit_cmd(&a),
        Command::Baseline(a) => commands::baseline_cmd(&a),
        Command::Eval(EvalCommand::Knn(a)) => commands::knn_cmd(&a),
        Command::Eval(EvalCommand::Retrieval(a)) => commands::retrieval_cmd(&a),
        Command::Sweep(a) => commands::sweep_cmd(&a),
        Command::Trace(a) => commands::trace_cmd(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let message = e.to_string();
            let first = message
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("{}", CliError::Usage(first.to_string()).report());
            return ExitCode::from(1);
        }
        Err(e) => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code())
        }
    }
}
