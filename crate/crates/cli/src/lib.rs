//! Command-line runner for the qudit learning experiments.
//!
//! Every command produces a [`ResultEnvelope`] that is written as CSV or JSON.
//! Exit status is 0 when all checks pass, 1 on a check failure and 2 on a usage
//! error.

pub mod commands;
pub mod config;
pub mod envelope;
mod error;
pub mod output;
pub mod runner;

use std::ffi::OsString;
use std::io::Write;
use std::time::Instant;

use clap::Parser;

pub use config::{Cli, CommandKind, Format, RunConfig, StateKind};
pub use envelope::{Cell, Check, Metadata, ResultEnvelope, Summary, SCHEMA_VERSION};
pub use error::{RunError, UsageError};
pub use runner::RayonRunner;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Runs a resolved configuration on its own worker pool, recording wall time.
pub fn execute(config: &RunConfig) -> Result<ResultEnvelope, RunError> {
    let runner = RayonRunner::new(config.workers)?;
    let start = Instant::now();
    let mut env = commands::run(config, &runner)?;
    env.metadata = Metadata { wall_time_seconds: start.elapsed().as_secs_f64(), workers: runner.workers() };
    Ok(env)
}

fn emit(env: &ResultEnvelope, config: &RunConfig) -> Result<(), RunError> {
    match &config.output_path {
        Some(path) => {
            output::write_results(env, path, config.format)?;
            output::write_metadata(env, path)
        }
        None => {
            let bytes = output::render(env, config.format)?;
            let mut out = std::io::stdout().lock();
            out.write_all(&bytes).and_then(|_| out.flush()).map_err(|e| RunError::Io { path: "<stdout>".into(), source: e })
        }
    }
}

/// Full CLI behaviour; returns the process exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let flags = match Cli::try_parse_from(args) {
        Ok(flags) => flags,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let config = match RunConfig::from_cli(flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let env = match execute(&config) {
        Ok(env) => env,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    if let Err(e) = emit(&env, &config) {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    for check in env.summary.checks.iter().filter(|c| !c.passed) {
        eprintln!("FAIL {}: {}", check.name, check.detail);
    }
    eprintln!(
        "{}: {} checks, {} failed, {:.2}s",
        config.command,
        env.summary.checks.len(),
        env.summary.failed,
        env.metadata.wall_time_seconds
    );
    if env.summary.passed {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILURE
    }
}
