//! Command-line front end.
//!
//! Every subcommand validates its inputs against the owning module's
//! preconditions before dispatch, emits CSV rows on standard output (12
//! significant digits for prices), and maps failures onto exit codes:
//! 2 for validation errors, 3 for numerical failures, 4 for I/O.
//!
//! A plain-text `key=value` config file can be passed with `--config`;
//! explicit flags always win over config entries.

mod handlers;
mod opts;
mod output;

use clap::Parser;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

/// Merge a `key=value` config file into argv: for each entry whose
/// `--key` is absent from the explicit arguments, append `--key value`.
fn merge_config(mut argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(pos) = argv.iter().position(|a| a == "--config") else {
        return Ok(argv);
    };
    if pos + 1 >= argv.len() {
        return Err(CliError::Validation("--config requires a path".into()));
    }
    let path = argv[pos + 1].clone();
    argv.drain(pos..=pos + 1);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Io(format!("cannot read config {path}: {e}")))?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Validation(format!(
                "{path}:{}: expected key=value, got {line:?}",
                lineno + 1
            )));
        };
        let flag = format!("--{}", key.trim());
        if !argv.iter().any(|a| *a == flag) {
            argv.push(flag);
            argv.push(value.trim().to_string());
        }
    }
    Ok(argv)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match merge_config(argv) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {}", e.message());
            return ExitCode::from(e.exit_code());
        }
    };
    let cli = match opts::Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version on stdout with status 0; real parse
            // errors map to the validation exit code
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match handlers::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
