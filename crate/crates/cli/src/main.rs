use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod error;
mod setup;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Propagate(a) => commands::propagate(a),
        Command::Exact(a) => commands::exact(a),
        Command::Compare(a) => commands::compare(a),
        Command::ScanRates(a) => commands::scan_rates(a),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    })
}
