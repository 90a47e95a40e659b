//! The `mortmap` command-line pipeline.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use config::RunConfig;
use error::Result;

#[derive(Debug, Parser)]
#[command(name = "mortmap", version, about = "County mortality mapping pipeline")]
pub struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one setting; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Output directory (falls back to MORTMAP_OUT, then `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Generate a synthetic data set.
    Synth,
    /// Fill suppressed rates.
    Impute,
    /// Compare imputation methods on masked complete data.
    Bench,
    /// Map rates onto a newer boundary set.
    Crosswalk,
    /// Interpolate and spatially fill covariate gaps.
    CovariatesFill,
    /// Fit distributions, label anomalies and rank features.
    Anomaly,
    /// Boosted-tree next-year prediction and importance.
    Gbt,
    /// Autoencoder next-year prediction and attributions.
    Ae,
    /// Summary statistics, efficacy and map layers.
    Report,
}

pub fn execute(command: Command, cfg: &RunConfig) -> Result<()> {
    match command {
        Command::Synth => commands::synth(cfg),
        Command::Impute => commands::impute(cfg),
        Command::Bench => commands::bench(cfg),
        Command::Crosswalk => commands::crosswalk(cfg),
        Command::CovariatesFill => commands::covariates_fill(cfg),
        Command::Anomaly => commands::anomaly(cfg),
        Command::Gbt => commands::gbt(cfg),
        Command::Ae => commands::ae(cfg),
        Command::Report => commands::report(cfg),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = RunConfig::load(cli.config.as_deref(), &cli.set, cli.out.as_deref())
        .and_then(|cfg| execute(cli.command, &cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mortmap: {e}");
            e.exit_code()
        }
    }
}
