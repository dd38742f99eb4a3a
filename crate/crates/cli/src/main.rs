//! Single command-line entry point wiring the toolkit into reproducible
//! pipeline runs.
//!
//! Exit codes are a stable contract: 0 success, 1 domain or validation
//! failure, 2 I/O or usage failure. Every run is fully determined by its
//! subcommand, flags, and input file bytes; subcommands that draw random
//! numbers require an explicit --seed. Every flag can also be set through an
//! `ATTRKIT_`-prefixed environment variable. Data goes to files; logs go to
//! standard error as one JSON object per line.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod errors;

use errors::CliError;

#[derive(Parser)]
#[command(name = "attrkit", version, about = "Structured-attribute annotation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an attribute dictionary document.
    Dict(commands::dict::DictArgs),
    /// Generate stochastic positive prompts and hard negatives per instance.
    Prompts(commands::prompts::PromptsArgs),
    /// Calibrate per-class probability thresholds from calibration records.
    Calibrate(commands::calibrate::CalibrateArgs),
    /// Filter candidate annotations under a calibrated threshold table.
    Filter(commands::filter::FilterArgs),
    /// Train the toy encoders on a labeled feature dataset.
    Train(commands::train::TrainArgs),
    /// Rank atomic or compositional prompts against labeled features.
    Eval(commands::eval::EvalArgs),
    /// Monte Carlo check of the conformal coverage guarantee.
    Simulate(commands::simulate::SimulateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Dict(args) => commands::dict::run(args),
        Command::Prompts(args) => commands::prompts::run(args),
        Command::Calibrate(args) => commands::calibrate::run(args),
        Command::Filter(args) => commands::filter::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Simulate(args) => commands::simulate::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Domain(message)) => {
            eprintln!("{}", errors::log_line("error", &message));
            ExitCode::from(1)
        }
        Err(CliError::Io(message)) => {
            eprintln!("{}", errors::log_line("io-error", &message));
            ExitCode::from(2)
        }
    }
}
