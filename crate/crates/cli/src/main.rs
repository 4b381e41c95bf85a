//! `threshrecon` command line.
//!
//! Exit codes: 0 success, 1 bad input, 2 internal consistency failure
//! (e.g. an energy increase under the factored scheme), 3 non-convergence
//! (outputs are still written).

mod args;
mod bench;
mod commands;
mod failure;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use failure::{Failure, EXIT_BAD_INPUT};

/// Caps the worker threads used for distance sampling.
const THREADS_ENV: &str = "THRESH_RECON_THREADS";

fn configure_threads() -> Result<(), Failure> {
    let Ok(text) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = text.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        Failure::BadInput(format!(
            "{THREADS_ENV} must be a positive integer, got {text:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Internal(e.to_string()))
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    configure_threads()?;
    match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Distance(a) => commands::distance(a),
        Command::Reconstruct(a) => commands::reconstruct_cmd(a),
        Command::Extract(a) => commands::extract_cmd(a),
        Command::Bench(a) => bench::bench(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_BAD_INPUT } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
