//! Command-line front end for the `qmine` simulator.
//!
//! Subcommands: `simulate` runs a TOML configuration, `analytic` prints the
//! closed-form stale-rate and double-spend tables, `figure1` produces the
//! stale rate against measurement time dataset, and `attack` replays the
//! timestamp-forging scenario.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on invalid input.

pub mod commands;
pub mod config;
pub mod duration;
pub mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qmine::tiebreak::TieBreakRule;

use config::Format;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl From<config::ValidationError> for CliError {
    fn from(e: config::ValidationError) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "qmine", version, about = "Quantum and classical mining simulator")]
pub struct Cli {
    /// Seed for every random stream; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the replications described by a TOML configuration.
    Simulate {
        config: PathBuf,
    },
    /// Closed-form stale rate and double-spend threshold tables.
    Analytic(AnalyticArgs),
    /// Simulated versus analytic stale rate over a grid of measurement times.
    Figure1(Figure1Args),
    /// Timestamp-forging attack against one victim block.
    Attack(AttackArgs),
}

fn minutes(s: &str) -> Result<f64, String> {
    duration::parse_cli_minutes(s).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    /// Measurement times (minutes unless suffixed with s or min).
    #[arg(long, value_delimiter = ',', value_parser = minutes)]
    pub t: Vec<f64>,
    #[arg(long, default_value = "10", value_parser = minutes)]
    pub block_interval: f64,
    /// Stale rates for the double-spend threshold table.
    #[arg(long, value_delimiter = ',')]
    pub p_stale: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct Figure1Args {
    #[arg(long, value_delimiter = ',', value_parser = minutes, default_value = "1,2,3,4,5,6,7,8,9")]
    pub t_grid: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub replications: usize,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Main-chain blocks per replication.
    #[arg(long, default_value_t = 10_000)]
    pub blocks: u64,
    #[arg(long, default_value = "10", value_parser = minutes)]
    pub block_interval: f64,
    #[arg(long, default_value = "0.6s", value_parser = minutes)]
    pub t_iteration: f64,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub rule: TieBreakRule,
    #[arg(long, default_value = "1s", value_parser = minutes)]
    pub victim_delay: f64,
    #[arg(long, default_value = "100s", value_parser = minutes)]
    pub mallory_delay: f64,
    #[arg(long, default_value = "1s", value_parser = minutes)]
    pub mallory_offset: f64,
    #[arg(long, default_value_t = 8)]
    pub observers: usize,
    #[arg(long, default_value_t = 100)]
    pub replications: usize,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate { config } => commands::simulate(&cli, config),
        Command::Analytic(a) => commands::analytic(&cli, a),
        Command::Figure1(a) => commands::figure1(&cli, a),
        Command::Attack(a) => commands::attack(&cli, a),
    }
}
