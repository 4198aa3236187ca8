//! Configuration file handling and the resolved run manifest shared by every
//! command.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sortbo::acquisition::CombinedWeights;
use sortbo::optimizer::{build_initial_design, OptimizationConfig};
use sortbo::simulator::SimulatorConfig;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub simulator: SimulatorConfig,
    pub optimizer: OptimizerSettings,
}

/// Loop settings as they appear in the configuration file. The initial design
/// is stored as per-dimension value lists and expanded on demand.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub reaction_lines: Vec<f64>,
    pub extended_time: Vec<f64>,
    pub extended_space: Vec<f64>,
    pub w_accept: f64,
    pub w_reject: f64,
    pub noise_weight: f64,
    pub search_margin: f64,
    pub max_steps: u32,
    pub convergence_tol: f64,
    pub convergence_patience: u32,
    pub ei_floor: f64,
    pub duration_s: u32,
    pub interval_s: u32,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        let cfg = OptimizationConfig::default();
        Self {
            reaction_lines: vec![12.0, 18.0, 21.0],
            extended_time: vec![0.0, 8.0],
            extended_space: vec![0.0, 8.0],
            w_accept: cfg.weights.w_accept,
            w_reject: cfg.weights.w_reject,
            noise_weight: cfg.noise_weight,
            search_margin: cfg.search_margin,
            max_steps: cfg.max_steps,
            convergence_tol: cfg.convergence_tol,
            convergence_patience: cfg.convergence_patience,
            ei_floor: cfg.ei_floor,
            duration_s: cfg.duration_s,
            interval_s: cfg.interval_s,
        }
    }
}

impl OptimizerSettings {
    pub fn weights(&self) -> Result<CombinedWeights, CliError> {
        CombinedWeights::new(self.w_accept, self.w_reject).map_err(|_| {
            CliError::Config(format!(
                "weights must be nonnegative and sum to 1, got {} and {}",
                self.w_accept, self.w_reject
            ))
        })
    }

    pub fn to_optimization_config(&self, weights: CombinedWeights) -> OptimizationConfig {
        OptimizationConfig {
            initial_design: build_initial_design(
                &self.reaction_lines,
                &self.extended_time,
                &self.extended_space,
            ),
            weights,
            noise_weight: self.noise_weight,
            search_margin: self.search_margin,
            max_steps: self.max_steps,
            convergence_tol: self.convergence_tol,
            convergence_patience: self.convergence_patience,
            ei_floor: self.ei_floor,
            duration_s: self.duration_s,
            interval_s: self.interval_s,
        }
    }
}

pub fn load(path: Option<&Path>) -> Result<AppConfig, CliError> {
    let Some(path) = path else {
        return Ok(AppConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
}

/// A command invocation with its configuration resolved: file settings, seed
/// override applied, output directory created.
pub struct RunManifest {
    pub config: AppConfig,
    pub out_dir: PathBuf,
    pub force: bool,
}

impl RunManifest {
    pub fn resolve(
        config_path: Option<&Path>,
        seed_override: Option<u64>,
        out_dir: &Path,
        force: bool,
    ) -> Result<Self, CliError> {
        let mut config = load(config_path)?;
        if let Some(seed) = seed_override {
            config.simulator.seed = seed;
        }
        fs::create_dir_all(out_dir)
            .map_err(|e| CliError::Runtime(format!("output dir {}: {e}", out_dir.display())))?;
        Ok(Self { config, out_dir: out_dir.to_path_buf(), force })
    }

    pub fn ledger_path(&self) -> PathBuf {
        self.out_dir.join("ledger.jsonl")
    }
}
