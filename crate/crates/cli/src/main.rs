//! `windbid`: scenario sampling, offer-curve solving, MIQP export and
//! historical backtests from the command line.

mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{BacktestConfig, ExportConfig, Flags, SampleConfig, SolveConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "windbid", version, about = "Risk-aware day-ahead offer curves for wind generators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw Gaussian (price, price, wind) scenarios to scenarios.csv
    Sample(Flags),
    /// Solve the CVaR offer curve for each beta
    Solve(Flags),
    /// Write the mixed-integer model in LP file format
    ExportMiqp(Flags),
    /// Replay strategies against historical prices and report regret
    Backtest(Flags),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sample(f) => commands::sample(&SampleConfig::resolve(&f)?),
        Command::Solve(f) => commands::solve(&SolveConfig::resolve(&f)?),
        Command::ExportMiqp(f) => commands::export_miqp(&ExportConfig::resolve(&f)?),
        Command::Backtest(f) => commands::backtest(&BacktestConfig::resolve(&f)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
