//! Binary entry point: parse, dispatch, and map errors to exit codes.

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use reenact_core::CoreError;

mod cli;
mod commands;
mod manifest;

/// Exit code contract: 0 success, 1 bad arguments or bad data, 2 filesystem
/// trouble, 3 a bug in this tool. Scripts depend on these staying put.
fn exit_code(err: &CoreError) -> u8 {
    match err {
        CoreError::Io { .. } => 2,
        CoreError::Internal(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            // clap routes help to stdout and errors to stderr on its own.
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
