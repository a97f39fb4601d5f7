//! `rds-lab`: runs one diagnostic per invocation and writes a JSON report.
//!
//!   rds-lab sync --system doublewell --d 2 --pair -2,0:2,0 --T 100 --trials 200 --seed 7 --out r.json
//!   rds-lab clusters --system circlemap --eps-c 0.3 --T 500 --m 200 --trials 400 --seed 7
//!   rds-lab cocycle-check --system doublewell --d 2 --s 0.5 --t 0.5 --seed 7
//!
//! Errors are printed as a single line `error: <kind>: <message>` and exit
//! with a non-zero status. Reports never contain wall-clock data, so the
//! same argv always produces the same bytes.

mod config;
mod run;

use std::process::ExitCode;

use clap::Parser;

use crate::config::{expand_config, Cli};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(String),
    Io(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Run(_) => "run",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Run(m) | CliError::Io(m) => m,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl From<rds_core::RdsError> for CliError {
    fn from(e: rds_core::RdsError) -> Self {
        match e {
            rds_core::RdsError::NotGridAligned { .. }
            | rds_core::RdsError::InvalidWindow { .. }
            | rds_core::RdsError::InvalidParameter { .. }
            | rds_core::RdsError::DimensionMismatch { .. }
            | rds_core::RdsError::MissingJacobian(_)
            | rds_core::RdsError::SamplerUnavailable(_) => CliError::Usage(e.to_string()),
            rds_core::RdsError::OutsideWindow { .. } => CliError::Run(e.to_string()),
            rds_core::RdsError::Io(m) => CliError::Io(m),
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let result = expand_config(argv).and_then(|argv| match Cli::try_parse_from(argv) {
        Ok(cli) => run::execute(cli),
        Err(e) if e.use_stderr() => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            Err(CliError::Usage(first.to_string()))
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.kind(), one_line(e.message()));
            ExitCode::from(e.exit_code())
        }
    }
}
