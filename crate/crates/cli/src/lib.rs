//! Command-line front end: reads panels, estimates and tests the model, and
//! writes JSON reports, CSV series and a run manifest.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod fit;
pub mod manifest;
pub mod report;

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "icapm", version, about = "Conditional ICAPM estimation with asymmetric multivariate GARCH")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Descriptive statistics, correlations and autocorrelations of the returns.
    Describe,
    /// Estimate the model and report parameters, tests and diagnostics.
    Estimate,
    /// Wald tests of named hypotheses, and a likelihood-ratio test against a nested fit.
    Test,
    /// Simulate a panel from a fit or from built-in illustrative parameters.
    Simulate,
    /// Conditional correlations of each asset with the world market.
    Correlations,
    /// Hodrick-Prescott decomposition of the world price of risk or of a CSV column.
    Hp,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Describe => "describe",
            Command::Estimate => "estimate",
            Command::Test => "test",
            Command::Simulate => "simulate",
            Command::Correlations => "correlations",
            Command::Hp => "hp",
        }
    }
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Flags {
    /// TOML or JSON config, or a manifest.json from a previous run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// symmetric | asymmetric | augmented
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Estimation window, YYYY-MM:YYYY-MM.
    #[arg(long, global = true)]
    pub window: Option<String>,
    #[arg(long, global = true)]
    pub hp_lambda: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write the price-of-risk series (raw and HP trend).
    #[arg(long, global = true)]
    pub emit_prices: bool,
    #[arg(long, global = true)]
    pub returns: Option<PathBuf>,
    #[arg(long, global = true)]
    pub global: Option<PathBuf>,
    /// Local instrument file, ASSET=PATH; repeatable.
    #[arg(long, global = true)]
    pub local: Vec<String>,
    /// Name of the world market column.
    #[arg(long, global = true)]
    pub world: Option<String>,
    /// Hypothesis name; repeatable.
    #[arg(long, global = true)]
    pub hypothesis: Vec<String>,
    /// Fit artifact (fit.json) from `estimate`.
    #[arg(long, global = true)]
    pub fit: Option<PathBuf>,
    /// Fit of the nested model for the likelihood-ratio test.
    #[arg(long, global = true)]
    pub restricted_fit: Option<PathBuf>,
    /// Simulated sample length.
    #[arg(long, global = true)]
    pub periods: Option<usize>,
    /// CSV input for `hp`.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Column of the `hp` input to filter.
    #[arg(long, global = true)]
    pub column: Option<String>,
}

/// How a run ended when no error was raised, in increasing severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Outcome {
    Success,
    /// Outputs were written but an estimation did not converge.
    NotConverged,
    /// Outputs were written but a requested test could not be computed.
    Incomplete,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Incomplete => 1,
            Outcome::NotConverged => 2,
        }
    }
}

/// Sizes the global thread pool from `ICAPM_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("ICAPM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("ICAPM_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            anyhow::bail!("ICAPM_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let (mut config, provenance) = match &cli.flags.config {
        Some(path) => RunConfig::load(path)?,
        None => (RunConfig::default(), Default::default()),
    };
    config.apply(&cli.flags)?;
    config.finalize()?;
    commands::execute(cli.command, &config, &provenance)
}
