//! Bayesian optimization of sensor-based sorting process parameters.
//!
//! The library couples two Gaussian process surrogates (one per sorting
//! objective) with a weighted Expected Improvement acquisition and drives a
//! deterministic virtual sorting plant as the experiment backend.

pub mod acquisition;
pub mod gpr;
pub mod ledger;
mod local_search;
pub mod metrics;
pub mod optimizer;
pub mod point;
pub mod simulator;

pub use acquisition::{AcquisitionState, CombinedWeights, SearchSpace};
pub use gpr::{GprModel, KernelParams, Posterior, TrainingSet};
pub use metrics::{ConfusionMatrix, ExperimentRecord, IntervalResult};
pub use optimizer::{
    ExperimentRunner, Ledger, OptimizationConfig, ReplayPlant, RunOutcome, RunStatus,
    SimulatorPlant,
};
pub use point::ParameterPoint;
pub use simulator::{SimObject, SimulatorConfig};
