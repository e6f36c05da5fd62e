//! Experiment runner: analytic sweeps, simulator runs, baseline evaluation and
//! the step-environment server. Every command writes CSV.

mod commands;
pub mod output;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mlo_core::ConfigFile;
use std::path::PathBuf;

pub use commands::{analytic, evaluate, serve, simulate};

/// Version tag written in the `schema` column of every CSV row.
pub const CSV_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Parser)]
#[command(name = "mlo-lab", version, about = "Wi-Fi 7 multi-link operation lab")]
pub struct Cli {
    /// Tracing filter, e.g. `info` or `mlo_core=debug`.
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fixed-point throughput for a policy, optionally swept over station counts.
    Analytic(AnalyticArgs),
    /// Simulated episodes under one policy, one row per decision step.
    Simulate(SimulateArgs),
    /// Every configured baseline over the given seeds, one row per baseline.
    Evaluate(EvaluateArgs),
    /// Serve the step environment over TCP or stdio.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML experiment file; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Common {
    pub fn load(&self) -> Result<ConfigFile> {
        match &self.config {
            Some(path) => ConfigFile::load(path).with_context(|| format!("loading {}", path.display())),
            None => Ok(ConfigFile::default()),
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub out: PathBuf,
    /// Channel seeds; the config seed when omitted.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Station counts to sweep; positions are redrawn for each.
    #[arg(long, value_delimiter = ',')]
    pub sweep_n: Vec<usize>,
    /// Baseline that picks the policy.
    #[arg(long, default_value = "uniform")]
    pub policy: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<u64>,
    #[arg(long, default_value = "uniform")]
    pub policy: String,
    /// Also write per-event channel traces to this CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<u64>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Listen address.
    #[arg(long, default_value = "127.0.0.1")]
    pub listen: String,
    #[arg(long, default_value_t = 7878)]
    pub port: u16,
    /// Speak the protocol on stdin/stdout instead of TCP.
    #[arg(long)]
    pub stdio: bool,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analytic(args) => analytic(&args),
        Command::Simulate(args) => simulate(&args),
        Command::Evaluate(args) => evaluate(&args),
        Command::Serve(args) => serve(&args),
    }
}

fn require_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        bail!("at least one seed is required");
    }
    Ok(())
}
