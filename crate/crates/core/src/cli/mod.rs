//! The `phev-demand` command line.
//!
//! Every command reads an optional TOML file (`--config`), applies flag
//! overrides, and writes CSV and JSON files under `--out`. Each file carries
//! the config hash; only the JSON sidecars carry a wall-clock timestamp.

mod config;
mod run;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::{
    parse_families, parse_months, parse_scenarios, DataSection, DemandSection, RunConfig, SvrSection, CURVE_FAMILIES,
    DEFAULT_SEED,
};
pub use run::run;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config values or missing input files.
    #[error("configuration error: {0}")]
    Config(String),
    /// Anything that fails after validation, including solver non-convergence.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "phev-demand", version, about = "Household demand with PHEV charging: curves, ν-SVR fits and error tables")]
pub struct Cli {
    #[command(flatten)]
    pub flags: Flags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Comma-separated months: numbers, names or `all`.
    #[arg(long, global = true, value_name = "LIST")]
    pub months: Option<String>,
    /// Comma-separated scenarios: no-phev, uniform-tc, non-uniform-tc or `all`.
    #[arg(long, global = true, value_name = "LIST")]
    pub scenarios: Option<String>,
    /// Vehicles per household.
    #[arg(long, global = true, value_name = "N")]
    pub fleet_size: Option<usize>,
    /// Comma-separated curve families or `all`.
    #[arg(long, global = true, value_name = "LIST")]
    pub families: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Load profile CSV, replacing `data.inputs`.
    #[arg(long, global = true, value_name = "PATH")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Expected per-vehicle demand curves, one CSV per family.
    DemandCurve,
    /// Synthetic household load profiles, one CSV per month.
    SynthProfile,
    /// Fit one model for the first month and scenario.
    Train,
    /// Score a saved model on a profile.
    Evaluate {
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
    },
    /// Coarse/fine search over (C, ν, γ).
    GridSearch,
    /// Month × scenario error table with one parameter set.
    Table,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::DemandCurve => "demand-curve",
            Command::SynthProfile => "synth-profile",
            Command::Train => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::GridSearch => "grid-search",
            Command::Table => "table",
        }
    }
}
