//! `hqi`: collect Taxi data, train hierarchical learners, evaluate them and
//! run learning-curve experiments.
//!
//! Exit status is 0 on success, 1 when an input breaks a contract (bad
//! option, invalid hierarchy, schema mismatch, divergence) and 2 when the
//! filesystem fails.

mod commands;
mod opts;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CollectOpts, EvaluateOpts, ExperimentOpts, OracleOpts, TrainOpts, ValidateOpts};

#[derive(Parser)]
#[command(name = "hqi", version, about = "Batch hierarchical Q-value iteration on the Taxi domain")]
struct Cli {
    /// TOML file with the command's options; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collect uniform-random transitions into a dataset file.
    Collect(CollectOpts),
    /// Train a hierarchical policy on a dataset.
    Train(TrainOpts),
    /// Evaluate a saved policy with greedy call-and-return execution.
    Evaluate(EvaluateOpts),
    /// Run a learning-curve experiment and write results CSVs.
    Experiment(ExperimentOpts),
    /// Check a hierarchy and print its training order.
    ValidateDag(ValidateOpts),
    /// Solve the true Taxi model by value iteration and evaluate it.
    Oracle(OracleOpts),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let config = cli.config.as_deref();
    let result = match &cli.command {
        Command::Collect(o) => commands::collect(config, o),
        Command::Train(o) => commands::train(config, o),
        Command::Evaluate(o) => commands::evaluate(config, o),
        Command::Experiment(o) => commands::experiment(config, o),
        Command::ValidateDag(o) => commands::validate_dag(config, o),
        Command::Oracle(o) => commands::oracle(config, o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
