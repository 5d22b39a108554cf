//! Command-line front end: one subcommand per study, driven by a JSON config,
//! writing CSV/JSON data plus a manifest into an output directory.

pub mod commands;
pub mod config;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{ConfigError, RunConfig, StudyName};

#[derive(Debug, Parser)]
#[command(name = "mpp", version, about = "Markov population process experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Flags {
    /// JSON run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides `simulation.seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides `output`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for replica ensembles; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Checkpoint grid size (overrides `simulation.grid_points`).
    #[arg(long, global = true)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Simulate trajectories of the jump process.
    Simulate,
    /// Integrate the mean-field equation on a truncation.
    Meanfield,
    /// Covariance of the Gaussian fluctuation limit (and optional sample paths).
    Lna,
    /// Law-of-large-numbers error rate across population sizes.
    Lln,
    /// Gaussian limit of the rescaled fluctuations at the horizon.
    Clt,
    /// Upper quantiles of sup_t S_r across population sizes.
    Moments,
    /// Mean of the compensated process at the horizon.
    Martingale,
    /// Check the structural assumptions on a truncation.
    Check,
    /// Rate exponents b1, b2 and the r0 threshold.
    Exponents,
    /// Run the study named by `study` in the config.
    Run,
    /// Print the effective configuration.
    Config,
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Core(mpp_core::Error),
}

impl CliError {
    /// 1 runtime, 2 configuration, 3 numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(mpp_core::Error::InvalidInput(_) | mpp_core::Error::InvalidJump(_)) => 2,
            CliError::Core(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => e.fmt(f),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<mpp_core::Error> for CliError {
    fn from(e: mpp_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

/// The config after command-line overrides.
pub fn effective_config(flags: &Flags) -> Result<RunConfig, CliError> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = flags.seed {
        cfg.simulation.seed = seed;
    }
    if let Some(out) = &flags.out {
        cfg.output = out.display().to_string();
    }
    if let Some(grid) = flags.grid {
        cfg.simulation.grid_points = grid;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = effective_config(&cli.flags)?;
    let study = match cli.command {
        Command::Config => {
            print!("{}", cfg.to_json());
            return Ok(());
        }
        Command::Run => cfg
            .study
            .ok_or_else(|| ConfigError::new("study", "`mpp run` needs a study in the config"))?,
        Command::Simulate => StudyName::Simulate,
        Command::Meanfield => StudyName::Meanfield,
        Command::Lna => StudyName::Lna,
        Command::Lln => StudyName::Lln,
        Command::Clt => StudyName::Clt,
        Command::Moments => StudyName::Moments,
        Command::Martingale => StudyName::Martingale,
        Command::Check => StudyName::Check,
        Command::Exponents => StudyName::Exponents,
    };
    let name = serde_json::to_value(study)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    let mut ctx = commands::Context::new(cfg)?;
    mpp_core::ensemble::with_threads(cli.flags.threads, || commands::dispatch(study, &mut ctx))??;
    ctx.finish(&name)
}
