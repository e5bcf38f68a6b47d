//! `operc`: exact checks, certificates and simulation from the command line.
//!
//! Exit codes: 0 success, 2 validation error, 3 resource error,
//! 4 internal-invariant violation or failed verification.

mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Format};
use operc_core::{Error, Result};

fn run(cli: &Cli) -> Result<i32> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Domain("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
    }
    let rendered = commands::dispatch(&cli.command, cli.threads)?;
    let body = match cli.format {
        Format::Text => rendered.text,
        Format::Csv => rendered.csv,
        Format::MachineRecord => {
            serde_json::to_string_pretty(&rendered.record).map_err(|e| Error::Invariant(e.to_string()))? + "\n"
        }
    };
    match &cli.output {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| Error::Resource(format!("writing {}: {e}", path.display())))?,
        None => {
            let mut out = std::io::stdout().lock();
            // A closed pipe is not an error worth reporting.
            let _ = out.write_all(body.as_bytes());
        }
    }
    Ok(rendered.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
