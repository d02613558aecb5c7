use std::process::ExitCode;

use clap::Parser;
use ltlab::cli::{error_record, run, violation_record, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) if outcome.violations == 0 => ExitCode::SUCCESS,
        Ok(outcome) => {
            eprintln!("{}", violation_record(&outcome));
            ExitCode::from(3)
        }
        Err(error) => {
            eprintln!("{}", error_record(&error));
            ExitCode::from(2)
        }
    }
}
