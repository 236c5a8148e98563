//! `stirap` — command-line front end.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical failure
//! (e.g. norm drift, clipping, failed verification), 3 I/O error.
//! Failures print one machine-parsable line to stderr:
//! `error: <validation|numerical|io>: <message>`.

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

mod commands;
mod config;
mod errors;

use commands::Cli;
use errors::CliError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first_line = e.to_string().lines().next().unwrap_or("bad arguments").to_string();
            return fail(CliError::validation(first_line));
        }
    };
    if let Err(e) = init_thread_pool() {
        return fail(e);
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{e}");
    ExitCode::from(e.exit_code())
}

// STIRAP_THREADS is the only environment knob: it sizes the rayon pool used
// by the parallel library paths. Results do not depend on it.
fn init_thread_pool() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("STIRAP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .map_err(|_| CliError::validation(format!("STIRAP_THREADS must be an integer, got '{raw}'")))?;
    if n == 0 {
        return Err(CliError::validation("STIRAP_THREADS must be ≥ 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::validation(format!("thread pool: {e}")))
}
