//! Command-line front end: `simulate | moments | check | validate | counterexample`.

mod commands;
pub mod config;
pub mod validation;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::version;
pub use config::{Experiment, ExperimentConfig};

use crate::error::{Error, Result};

/// Environment variable that overrides the output directory of the config.
pub const OUT_ENV: &str = "MUCOGARCH_OUT";

/// Configuration shipped with the crate; `validate` uses it when no file is given.
pub const DEFAULT_CONFIG: &str = include_str!("../../configs/default.json");

#[derive(Debug, Parser)]
#[command(name = "mucogarch", version, about = "Multivariate COGARCH(1,1) simulation and moment checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_ENV)]
    pub out: Option<PathBuf>,
    /// Restricts `validate` to one criterion (name or number).
    #[arg(long, global = true)]
    pub only: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate paths and write CSVs plus a manifest.
    Simulate,
    /// Closed-form stationary moments.
    Moments,
    /// Stationarity conditions and spectral checks.
    Check,
    /// Run the acceptance suite.
    Validate,
    /// The deterministic positivity counterexample.
    Counterexample,
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

/// `0` pass, `1` criterion failure, `2` config error, `3` internal error.
pub fn exit_code(result: &Result<Status>) -> i32 {
    match result {
        Ok(Status::Pass) => 0,
        Ok(Status::Fail) => 1,
        Err(Error::Config(_)) => 2,
        Err(_) => 3,
    }
}

fn load(cli: &Cli) -> Result<Experiment> {
    match &cli.config {
        Some(p) => ExperimentConfig::from_path(p),
        None => Err(Error::Config("--config <file> is required for this command".into())),
    }
}

pub fn run(cli: &Cli, w: &mut dyn Write) -> Result<Status> {
    match cli.command {
        Command::Counterexample => commands::counterexample_cmd(cli.out.as_deref(), w),
        Command::Validate => {
            let exp = match &cli.config {
                Some(p) => ExperimentConfig::from_path(p)?,
                None => ExperimentConfig::parse(DEFAULT_CONFIG, "default.json")?,
            };
            let settings = validation::Settings {
                seed: cli.seed.unwrap_or(validation::DEFAULT_SEED),
                tolerance_scale: exp.config.validation.tolerance_scale,
            };
            commands::validate(settings, cli.only.as_deref(), cli.out.as_deref(), w)
        }
        cmd => {
            let exp = load(cli)?;
            let seed = cli.seed.unwrap_or(exp.config.run.seed);
            let dir = cli.out.clone().unwrap_or_else(|| exp.config.outputs.directory.clone());
            match cmd {
                Command::Simulate => commands::simulate(&exp, seed, &dir, w),
                Command::Moments => commands::moments(&exp, &dir, w),
                _ => commands::check(&exp, seed, &dir, w),
            }
        }
    }
}
