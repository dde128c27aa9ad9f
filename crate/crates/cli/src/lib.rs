//! Command-line front end for `langinc-core`: configuration loading, the
//! `sample | fp | jko | gibbs | metrics | repro` commands, and CSV, JSON and
//! SVG output.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 when a numerical
//! routine diverges, 1 for anything else (I/O).

pub mod commands;
pub mod config;
pub mod output;
pub mod repro;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use langinc_core::fokker_planck::FpError;
use langinc_core::gibbs::GibbsError;
use langinc_core::jko::JkoError;
use langinc_core::metrics::MetricsError;
use langinc_core::potential::PotentialError;
use langinc_core::sampler::SamplerError;
use thiserror::Error;

use crate::config::{ExperimentConfig, InitSpec};
use crate::repro::Figure;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("diverged: {0}")]
    Diverged(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Diverged(_) => 3,
            Self::Other(_) => 1,
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::Config(_) => Self::Config(e.to_string()),
            SamplerError::Diverged { .. } => Self::Diverged(e.to_string()),
        }
    }
}

impl From<FpError> for CliError {
    fn from(e: FpError) -> Self {
        match e {
            FpError::Singular | FpError::NoConvergence { .. } => Self::Diverged(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<JkoError> for CliError {
    fn from(e: JkoError) -> Self {
        match e {
            JkoError::LineSearch { .. } => Self::Diverged(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<PotentialError> for CliError {
    fn from(e: PotentialError) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<GibbsError> for CliError {
    fn from(e: GibbsError) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        Self::Config(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "langinc", version, about = "Langevin dynamics with set-valued drift")]
pub struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: `output` from the config, else `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the sampler seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run sampler chains and write their samples.
    Sample,
    /// Fokker–Planck steady state, interface residuals and snapshots.
    Fp,
    /// Minimizing-movement run in quantile coordinates.
    Jko(JkoArgs),
    /// Gibbs density, CDF and normalizer.
    Gibbs,
    /// W1 between two sample files, or one file and the Gibbs law.
    Metrics(MetricsArgs),
    /// Reproduce one of the experiment figures.
    Repro {
        #[arg(value_enum)]
        figure: Figure,
    },
}

#[derive(Debug, Default, Args)]
pub struct JkoArgs {
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long = "m")]
    pub m: Option<usize>,
    /// `gaussian(mean, std)` or `uniform(a, b)`.
    #[arg(long)]
    pub init: Option<InitSpec>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Sample CSV (column `x`, or the last column).
    #[arg(long)]
    pub a: PathBuf,
    /// Second sample CSV; without it the Gibbs law of the config is used.
    #[arg(long)]
    pub b: Option<PathBuf>,
}

pub fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let src = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_toml(&src).map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
                other => other,
            })?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.sampler.seed = seed;
    }
    Ok(cfg)
}

/// Runs the parsed command and returns the files it wrote.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let cfg = load_config(cli)?;
    let out = cli.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    output::ensure_dir(&out)?;
    match &cli.command {
        Command::Sample => commands::cmd_sample(&cfg, &out),
        Command::Fp => commands::cmd_fp(&cfg, &out),
        Command::Jko(args) => commands::cmd_jko(&cfg, args, &out),
        Command::Gibbs => commands::cmd_gibbs(&cfg, &out),
        Command::Metrics(args) => commands::cmd_metrics(&cfg, args, &out),
        Command::Repro { figure } => repro::cmd_repro(&cfg, *figure, &out),
    }
}
