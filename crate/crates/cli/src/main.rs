use std::process::ExitCode;

use clap::Parser;
use pcgen_cli::args::Cli;
use pcgen_cli::{exit_code, run};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
