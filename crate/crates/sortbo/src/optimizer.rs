//! The closed optimization loop: run an initial design of experiments, fit
//! one surrogate per quality objective, propose the next setting by combined
//! expected improvement, execute it, repeat until proposals stabilize or the
//! acquisition signal dies out.
//!
//! Experiments run behind the [`ExperimentRunner`] trait so the loop drives
//! the virtual plant and a recorded ledger identically. Repeated proposals
//! are re-executed with a fresh per-ordinal seed rather than looked up; the
//! plant is noisy and a second visit is new evidence.

use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use thiserror::Error;

use crate::acquisition::{
    maximize_combined_ei, maximize_over_space, round_to_actuation, AcquisitionError,
    AcquisitionState, CombinedWeights, SearchSpace,
};
use crate::gpr::{fit, GprError, GprModel, KernelParams, TrainingSet};
use crate::metrics::{aggregate_experiment, ExperimentRecord, IntervalResult, MetricsError};
use crate::point::ParameterPoint;
use crate::simulator::{mix_seed, run_experiment, SimulatorConfig, SimulatorError};

/// Kernel every per-step hyperparameter search starts from. The nugget stays
/// fixed during the search, so zero-variance observations remain factorizable.
const INITIAL_KERNEL: KernelParams = KernelParams {
    signal_variance: 1.0,
    length_scales: [1.0, 1.0, 1.0],
    nugget: 1e-8,
};

/// Margin and noise weight used when computing a reference optimum from an
/// existing set of records, independent of any run configuration.
const REFERENCE_MARGIN: f64 = 1.0;
const REFERENCE_NOISE_WEIGHT: f64 = 0.1;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("invalid optimization config: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Model(#[from] GprError),
    #[error(transparent)]
    Acquisition(#[from] AcquisitionError),
    #[error(transparent)]
    Aggregation(#[from] MetricsError),
    #[error("experiment failed: {0}")]
    Plant(#[from] PlantError),
}

#[derive(Debug, Error, PartialEq)]
pub enum PlantError {
    #[error(transparent)]
    Simulator(#[from] SimulatorError),
    #[error("no recorded experiment left to replay for {0}")]
    ReplayExhausted(ParameterPoint),
}

/// Settings for one optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationConfig {
    pub initial_design: Vec<ParameterPoint>,
    pub weights: CombinedWeights,
    /// Multiplier on each record's observed variance before it enters the
    /// surrogate as measurement noise.
    pub noise_weight: f64,
    /// Widens the search space beyond the design's bounding box, per side.
    pub search_margin: f64,
    pub max_steps: u32,
    /// Chebyshev radius within which consecutive actuated proposals count as
    /// stable.
    pub convergence_tol: f64,
    /// Consecutive stable steps required to declare convergence.
    pub convergence_patience: u32,
    /// The run also converges when the best combined EI falls below this.
    pub ei_floor: f64,
    /// Experiment length and measurement interval handed to the plant.
    pub duration_s: u32,
    pub interval_s: u32,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            initial_design: build_initial_design(
                &[12.0, 18.0, 21.0],
                &[0.0, 8.0],
                &[0.0, 8.0],
            ),
            weights: CombinedWeights { w_accept: 0.5, w_reject: 0.5 },
            noise_weight: 0.1,
            search_margin: 1.0,
            max_steps: 8,
            convergence_tol: 1.0,
            convergence_patience: 2,
            ei_floor: 1e-4,
            duration_s: 300,
            interval_s: 10,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        if self.initial_design.is_empty() {
            return Err(OptimizerError::Config("initial design must not be empty"));
        }
        if self.initial_design.iter().any(|p| !p.is_valid()) {
            return Err(OptimizerError::Config(
                "initial design points must be finite and nonnegative",
            ));
        }
        let first = self.initial_design[0].as_array();
        let varied = self
            .initial_design
            .iter()
            .any(|p| p.as_array().iter().zip(first.iter()).any(|(a, b)| a != b));
        if !varied {
            return Err(OptimizerError::Config(
                "initial design needs at least two distinct values in some dimension",
            ));
        }
        self.weights.validate()?;
        if !(self.noise_weight.is_finite() && self.noise_weight >= 0.0) {
            return Err(OptimizerError::Config("noise_weight must be finite and nonnegative"));
        }
        if !(self.search_margin.is_finite() && self.search_margin >= 0.0) {
            return Err(OptimizerError::Config("search_margin must be finite and nonnegative"));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return Err(OptimizerError::Config("convergence_tol must be finite and positive"));
        }
        if self.convergence_patience == 0 {
            return Err(OptimizerError::Config("convergence_patience must be at least 1"));
        }
        if !(self.ei_floor.is_finite() && self.ei_floor >= 0.0) {
            return Err(OptimizerError::Config("ei_floor must be finite and nonnegative"));
        }
        if self.duration_s == 0 || self.interval_s == 0 || !self.duration_s.is_multiple_of(self.interval_s)
        {
            return Err(OptimizerError::Config(
                "interval_s must be positive and divide duration_s",
            ));
        }
        Ok(())
    }
}

/// Full factorial design over per-dimension value lists, in lexicographic
/// order with the reaction setting outermost.
pub fn build_initial_design(
    reaction_lines: &[f64],
    extended_time: &[f64],
    extended_space: &[f64],
) -> Vec<ParameterPoint> {
    let mut design =
        Vec::with_capacity(reaction_lines.len() * extended_time.len() * extended_space.len());
    for &tr in reaction_lines {
        for &et in extended_time {
            for &se in extended_space {
                design.push(ParameterPoint::new(tr, et, se));
            }
        }
    }
    design
}

/// Axis-aligned bounding box of the design, widened by `margin` on each side
/// and floored at zero coordinate-wise.
pub fn derive_search_space(
    design: &[ParameterPoint],
    margin: f64,
) -> Result<SearchSpace, OptimizerError> {
    let first = design
        .first()
        .ok_or(OptimizerError::Config("cannot derive a search space from an empty design"))?;
    let mut lo = first.as_array();
    let mut hi = lo;
    for p in &design[1..] {
        let a = p.as_array();
        for d in 0..3 {
            lo[d] = lo[d].min(a[d]);
            hi[d] = hi[d].max(a[d]);
        }
    }
    for d in 0..3 {
        lo[d] = (lo[d] - margin).max(0.0);
        hi[d] += margin;
    }
    Ok(SearchSpace::new(
        ParameterPoint::from_array(lo),
        ParameterPoint::from_array(hi),
    )?)
}

/// One acquisition proposal: the continuous argmax and its integer actuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub step: u32,
    pub raw: ParameterPoint,
    pub actuated: ParameterPoint,
    pub combined_ei_value: f64,
}

/// A proposal or design point whose experiment could not be completed.
/// Design-phase failures carry no step number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub step: Option<u32>,
    pub actuated: ParameterPoint,
    pub message: String,
}

/// Append-only run history: executed experiments plus the proposals (and
/// failures) that produced them. Proposal step numbers increase strictly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    records: Vec<ExperimentRecord>,
    proposals: Vec<Proposal>,
    failures: Vec<FailureEntry>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Seeds a ledger with experiments recorded elsewhere, e.g. to continue
    /// stepping from a persisted run.
    pub fn from_records(records: Vec<ExperimentRecord>) -> Self {
        Self { records, proposals: Vec::new(), failures: Vec::new() }
    }

    pub fn records(&self) -> &[ExperimentRecord] {
        &self.records
    }

    pub fn proposals(&self) -> &[Proposal] {
        &self.proposals
    }

    pub fn failures(&self) -> &[FailureEntry] {
        &self.failures
    }

    fn next_step(&self) -> u32 {
        self.proposals.last().map_or(1, |p| p.step + 1)
    }
}

/// One entry appended to the run history, in append order.
#[derive(Debug, Clone, Copy)]
pub enum LedgerEvent<'a> {
    Record(&'a ExperimentRecord),
    Proposal(&'a Proposal),
    Failure(&'a FailureEntry),
}

/// Executes one sorting experiment at an actuated setting. `ordinal` counts
/// experiments already run in this history, so a repeated setting still sees
/// fresh process conditions.
pub trait ExperimentRunner {
    fn run_experiment(
        &mut self,
        params: &ParameterPoint,
        ordinal: u64,
    ) -> Result<Vec<IntervalResult>, PlantError>;
}

/// Runs experiments on the virtual plant, deriving a fresh stream seed from
/// the experiment ordinal.
#[derive(Debug, Clone)]
pub struct SimulatorPlant {
    config: SimulatorConfig,
    duration_s: u32,
    interval_s: u32,
}

impl SimulatorPlant {
    pub fn new(config: SimulatorConfig, duration_s: u32, interval_s: u32) -> Self {
        Self { config, duration_s, interval_s }
    }
}

impl ExperimentRunner for SimulatorPlant {
    fn run_experiment(
        &mut self,
        params: &ParameterPoint,
        ordinal: u64,
    ) -> Result<Vec<IntervalResult>, PlantError> {
        let mut config = self.config.clone();
        config.seed = mix_seed(self.config.seed, ordinal);
        Ok(run_experiment(&config, params, self.duration_s, self.interval_s)?)
    }
}

fn replay_key(p: &ParameterPoint) -> [i64; 3] {
    let a = p.as_array();
    [a[0] as i64, a[1] as i64, a[2] as i64]
}

/// Replays interval results recorded earlier, keyed by actuated setting.
/// Repeated settings are consumed in recorded order and then run dry.
#[derive(Debug, Clone, Default)]
pub struct ReplayPlant {
    by_params: HashMap<[i64; 3], VecDeque<Vec<IntervalResult>>>,
}

impl ReplayPlant {
    pub fn from_records(records: &[ExperimentRecord]) -> Self {
        let mut by_params: HashMap<[i64; 3], VecDeque<Vec<IntervalResult>>> = HashMap::new();
        for r in records {
            by_params.entry(replay_key(&r.params)).or_default().push_back(r.intervals.clone());
        }
        Self { by_params }
    }
}

impl ExperimentRunner for ReplayPlant {
    fn run_experiment(
        &mut self,
        params: &ParameterPoint,
        _ordinal: u64,
    ) -> Result<Vec<IntervalResult>, PlantError> {
        self.by_params
            .get_mut(&replay_key(params))
            .and_then(VecDeque::pop_front)
            .ok_or(PlantError::ReplayExhausted(*params))
    }
}

fn fit_surrogate(
    records: &[ExperimentRecord],
    noise_weight: f64,
    target: impl Fn(&ExperimentRecord) -> f64,
    noise_var: impl Fn(&ExperimentRecord) -> f64,
) -> Result<GprModel, GprError> {
    let inputs: Vec<ParameterPoint> = records.iter().map(|r| r.params).collect();
    let targets: Vec<f64> = records.iter().map(&target).collect();
    let noise: Vec<f64> = records.iter().map(&noise_var).collect();
    let training = TrainingSet::new(inputs, targets, noise, noise_weight)?;
    fit(training, INITIAL_KERNEL, true)
}

/// Runs one experiment and appends the outcome. A plant or aggregation
/// failure appends a failure entry and propagates; the records are otherwise
/// untouched.
fn execute_experiment(
    ledger: &mut Ledger,
    cfg: &OptimizationConfig,
    plant: &mut dyn ExperimentRunner,
    actuated: ParameterPoint,
    step: Option<u32>,
    observe: &mut dyn FnMut(LedgerEvent),
) -> Result<(), OptimizerError> {
    let ordinal = ledger.records.len() as u64;
    let mut log_failure = |ledger: &mut Ledger, message: String| {
        ledger.failures.push(FailureEntry { step, actuated, message });
        observe(LedgerEvent::Failure(ledger.failures.last().unwrap()));
    };
    let intervals = match plant.run_experiment(&actuated, ordinal) {
        Ok(intervals) => intervals,
        Err(e) => {
            log_failure(ledger, e.to_string());
            return Err(e.into());
        }
    };
    let mut record = match aggregate_experiment(actuated, &intervals) {
        Ok(record) => record,
        Err(e) => {
            log_failure(ledger, e.to_string());
            return Err(e.into());
        }
    };
    // Virtual plant clock: experiments run back to back, each duration_s long.
    record.timestamp = ordinal as f64 * cfg.duration_s as f64;
    ledger.records.push(record);
    observe(LedgerEvent::Record(ledger.records.last().unwrap()));
    Ok(())
}

fn step_inner(
    ledger: &mut Ledger,
    cfg: &OptimizationConfig,
    plant: &mut dyn ExperimentRunner,
    space: &SearchSpace,
    observe: &mut dyn FnMut(LedgerEvent),
) -> Result<Proposal, OptimizerError> {
    if ledger.records.is_empty() {
        return Err(OptimizerError::Config("cannot step before any experiment is recorded"));
    }
    let model_accept =
        fit_surrogate(&ledger.records, cfg.noise_weight, |r| r.tp_n_mean, |r| r.tp_n_var)?;
    let model_reject =
        fit_surrogate(&ledger.records, cfg.noise_weight, |r| r.tn_n_mean, |r| r.tn_n_var)?;
    let state = AcquisitionState {
        best_accept: ledger.records.iter().map(|r| r.tp_n_mean).fold(f64::NEG_INFINITY, f64::max),
        best_reject: ledger.records.iter().map(|r| r.tn_n_mean).fold(f64::NEG_INFINITY, f64::max),
    };
    let (raw, ei) = maximize_combined_ei(&model_accept, &model_reject, &state, &cfg.weights, space);
    let actuated = round_to_actuation(&raw, space);
    let proposal =
        Proposal { step: ledger.next_step(), raw, actuated, combined_ei_value: ei };
    ledger.proposals.push(proposal.clone());
    observe(LedgerEvent::Proposal(ledger.proposals.last().unwrap()));
    execute_experiment(ledger, cfg, plant, actuated, Some(proposal.step), observe)?;
    Ok(proposal)
}

/// Fits both surrogates to the recorded experiments, proposes the combined-EI
/// argmax, and executes its actuation through the plant. Appends the proposal
/// and the resulting record to the ledger.
pub fn step(
    ledger: &mut Ledger,
    cfg: &OptimizationConfig,
    plant: &mut dyn ExperimentRunner,
) -> Result<Proposal, OptimizerError> {
    cfg.validate()?;
    let space = derive_search_space(&cfg.initial_design, cfg.search_margin)?;
    step_inner(ledger, cfg, plant, &space, &mut |_| {})
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// Consecutive actuated proposals stayed within the stability tolerance.
    ConvergedStable,
    /// The best available combined EI fell below the configured floor.
    ConvergedEiFloor,
    /// max_steps elapsed without meeting either convergence rule.
    BudgetExhausted,
}

impl RunStatus {
    pub fn is_converged(self) -> bool {
        !matches!(self, RunStatus::BudgetExhausted)
    }
}

/// Everything a finished run produced. `best` is the recorded setting with
/// the highest observed weighted objective, earliest record on ties.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub ledger: Ledger,
    pub best: ParameterPoint,
    pub status: RunStatus,
    pub steps_executed: u32,
}

/// Runs the full loop: initial design, then EI steps until proposals are
/// stable for `convergence_patience` consecutive steps, the acquisition
/// signal drops below `ei_floor`, or `max_steps` experiments are spent.
/// Exhausting the budget is an outcome, not an error.
pub fn run(
    cfg: &OptimizationConfig,
    plant: &mut dyn ExperimentRunner,
) -> Result<RunOutcome, OptimizerError> {
    run_with_observer(cfg, plant, |_| {})
}

/// [`run`], reporting every appended ledger entry to `observe` as it lands.
pub fn run_with_observer(
    cfg: &OptimizationConfig,
    plant: &mut dyn ExperimentRunner,
    mut observe: impl FnMut(LedgerEvent),
) -> Result<RunOutcome, OptimizerError> {
    cfg.validate()?;
    let space = derive_search_space(&cfg.initial_design, cfg.search_margin)?;
    let mut ledger = Ledger::new();
    for point in &cfg.initial_design {
        let actuated = round_to_actuation(point, &space);
        execute_experiment(&mut ledger, cfg, plant, actuated, None, &mut observe)?;
    }

    let mut status = RunStatus::BudgetExhausted;
    let mut steps_executed = 0;
    let mut stable_streak = 0;
    let mut previous: Option<ParameterPoint> = None;
    for _ in 0..cfg.max_steps {
        let proposal = step_inner(&mut ledger, cfg, plant, &space, &mut observe)?;
        steps_executed += 1;
        if proposal.combined_ei_value < cfg.ei_floor {
            status = RunStatus::ConvergedEiFloor;
            break;
        }
        match previous {
            Some(prev) if proposal.actuated.chebyshev_distance(&prev) < cfg.convergence_tol => {
                stable_streak += 1;
            }
            _ => stable_streak = 0,
        }
        previous = Some(proposal.actuated);
        if stable_streak >= cfg.convergence_patience {
            status = RunStatus::ConvergedStable;
            break;
        }
    }

    let best = best_observed(&ledger, &cfg.weights)
        .expect("design phase recorded at least one experiment");
    Ok(RunOutcome { ledger, best, status, steps_executed })
}

/// The recorded setting with the highest observed weighted objective;
/// earliest record wins ties. None on an empty ledger.
pub fn best_observed(ledger: &Ledger, weights: &CombinedWeights) -> Option<ParameterPoint> {
    let mut best: Option<(f64, ParameterPoint)> = None;
    for r in &ledger.records {
        let score = weights.w_accept * r.tp_n_mean + weights.w_reject * r.tn_n_mean;
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, r.params));
        }
    }
    best.map(|(_, p)| p)
}

/// Continuous argmax of the weighted posterior means over the records'
/// bounding box widened by one unit per side, with surrogates refit to all
/// records. A flat posterior resolves to the lexicographically smallest
/// point.
pub fn reference_best(
    records: &[ExperimentRecord],
    weights: &CombinedWeights,
) -> Result<ParameterPoint, OptimizerError> {
    weights.validate()?;
    if records.is_empty() {
        return Err(OptimizerError::Config("reference optimum needs at least one record"));
    }
    let inputs: Vec<ParameterPoint> = records.iter().map(|r| r.params).collect();
    let space = derive_search_space(&inputs, REFERENCE_MARGIN)?;
    let model_accept =
        fit_surrogate(records, REFERENCE_NOISE_WEIGHT, |r| r.tp_n_mean, |r| r.tp_n_var)?;
    let model_reject =
        fit_surrogate(records, REFERENCE_NOISE_WEIGHT, |r| r.tn_n_mean, |r| r.tn_n_var)?;
    let (point, _) = maximize_over_space(&space, |x| {
        let mut total = 0.0;
        if weights.w_accept != 0.0 {
            total += weights.w_accept * model_accept.predict(x).mean;
        }
        if weights.w_reject != 0.0 {
            total += weights.w_reject * model_reject.predict(x).mean;
        }
        total
    });
    Ok(point)
}
