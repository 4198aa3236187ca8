//! Command-line front end for the sorting optimizer: run single experiments,
//! sweep parameter grids, drive the closed optimization loop and export
//! reports from recorded ledgers.

mod args;
mod config;
mod optimize;
mod report;
mod simulate;
mod sweep;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunManifest;

/// Failures are split by exit code: configuration and usage problems exit
/// with 1, runtime failures with 2.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) | CliError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<sortbo::ledger::LedgerError> for CliError {
    fn from(err: sortbo::ledger::LedgerError) -> Self {
        match err {
            sortbo::ledger::LedgerError::AlreadyExists(path) => CliError::Config(format!(
                "{} already exists; pass --force to overwrite",
                path.display()
            )),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<sortbo::metrics::MetricsError> for CliError {
    fn from(err: sortbo::metrics::MetricsError) -> Self {
        CliError::Runtime(err.to_string())
    }
}

impl From<sortbo::simulator::SimulatorError> for CliError {
    fn from(err: sortbo::simulator::SimulatorError) -> Self {
        CliError::Config(err.to_string())
    }
}

#[derive(Parser)]
#[command(name = "sortbo", version, about = "Sensor-based sorting parameter optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (TOML); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the simulator seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created when missing.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Overwrite an existing ledger file.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one sorting experiment and record it in a fresh ledger.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Actuated parameters as tr,et,se.
        #[arg(long, default_value = "15,0,0")]
        params: String,
    },
    /// Measure a full parameter grid and export the response surface.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Three dimension specs joined by `x`, each a comma list or
        /// an inclusive start:stop:step range.
        #[arg(long)]
        grid: Option<String>,
        /// Stream weights as wa,wr.
        #[arg(long)]
        weights: Option<String>,
    },
    /// Run the closed optimization loop against the simulator.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Stream weights as wa,wr.
        #[arg(long)]
        weights: Option<String>,
    },
    /// Export an analysis of a previously written ledger.
    Report {
        #[command(flatten)]
        common: Common,
        /// Which analysis to produce.
        #[arg(long, value_enum)]
        mode: ReportMode,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportMode {
    /// Re-bucket interval records and fit the variance power law.
    #[value(name = "variance_study")]
    VarianceStudy,
    /// Posterior mean and variance of both models over a parameter grid.
    #[value(name = "surface")]
    Surface,
    /// Flatten experiment records into a CSV table.
    #[value(name = "ledger_csv")]
    LedgerCsv,
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate { common, params } => {
            let point = args::parse_params(&params)?;
            let manifest = manifest_for(&common)?;
            simulate::run(&manifest, point)
        }
        Command::Sweep { common, grid, weights } => {
            let grid = match grid {
                Some(spec) => args::parse_grid(&spec)?,
                None => args::default_grid(),
            };
            let flag_weights = parse_flag_weights(weights.as_deref())?;
            let manifest = manifest_for(&common)?;
            let weights = resolve_weights(&manifest, flag_weights)?;
            sweep::run(&manifest, &grid, &weights)
        }
        Command::Optimize { common, weights } => {
            let flag_weights = parse_flag_weights(weights.as_deref())?;
            let manifest = manifest_for(&common)?;
            let weights = resolve_weights(&manifest, flag_weights)?;
            optimize::run(&manifest, weights)
        }
        Command::Report { common, mode } => {
            let manifest = manifest_for(&common)?;
            report::run(&manifest, mode)
        }
    }
}

fn manifest_for(common: &Common) -> Result<RunManifest, CliError> {
    RunManifest::resolve(common.config.as_deref(), common.seed, &common.out, common.force)
}

/// Flag weights are validated before any directory is touched; they win over
/// configuration weights.
fn parse_flag_weights(
    flag: Option<&str>,
) -> Result<Option<sortbo::acquisition::CombinedWeights>, CliError> {
    flag.map(args::parse_weights).transpose()
}

fn resolve_weights(
    manifest: &RunManifest,
    flag: Option<sortbo::acquisition::CombinedWeights>,
) -> Result<sortbo::acquisition::CombinedWeights, CliError> {
    match flag {
        Some(weights) => Ok(weights),
        None => manifest.config.optimizer.weights(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                err.exit();
            }
            let _ = err.print();
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
