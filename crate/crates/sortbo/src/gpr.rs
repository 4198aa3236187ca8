//! Gaussian process regression with a squared-exponential ARD kernel and
//! per-observation noise variances.
//!
//! Targets are standardized internally (zero mean, unit scale) before any
//! linear algebra; predictions are mapped back to the original scale. The
//! supplied noise variances live on the original target scale and are divided
//! by the squared standardization scale when they enter the Gram matrix.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::local_search::nelder_mead_max;
use crate::point::ParameterPoint;

/// Largest nugget the escalation ladder will try before giving up.
const NUGGET_CEILING: f64 = 1e-2;
/// First rung of the ladder when the configured nugget is exactly zero.
const NUGGET_FLOOR: f64 = 1e-8;

/// Hyperparameter search box in log space: signal variance in [0.1, 10],
/// length scales in [0.1, 10] times the per-dimension input range.
const LOG_BOX_LO: f64 = -std::f64::consts::LN_10;
const LOG_BOX_HI: f64 = std::f64::consts::LN_10;
const RESTART_COUNT: usize = 8;
const RESTART_SEED: u64 = 0x5eed_cafe_0000_0001;
const RESTART_ITERATIONS: usize = 120;

#[derive(Debug, Error, PartialEq)]
pub enum GprError {
    #[error("training set is empty")]
    EmptyTraining,
    #[error("inputs, targets and noise variances must have matching lengths")]
    LengthMismatch,
    #[error("invalid training data: {0}")]
    InvalidTraining(&'static str),
    #[error("invalid kernel parameters: {0}")]
    InvalidKernel(&'static str),
    #[error("kernel matrix is not positive definite even with nugget {nugget:e}")]
    FactorizationFailure { nugget: f64 },
    #[error("coincident inputs with differing targets require a noise term or nugget")]
    DegenerateInput,
}

/// Squared-exponential ARD kernel: one length scale per input dimension plus
/// a diagonal nugget applied to the Gram matrix only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub length_scales: [f64; 3],
    pub nugget: f64,
}

impl KernelParams {
    pub fn validate(&self) -> Result<(), GprError> {
        if !(self.signal_variance.is_finite() && self.signal_variance > 0.0) {
            return Err(GprError::InvalidKernel("signal variance must be finite and positive"));
        }
        if self.length_scales.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(GprError::InvalidKernel("length scales must be finite and positive"));
        }
        if !(self.nugget.is_finite() && self.nugget >= 0.0) {
            return Err(GprError::InvalidKernel("nugget must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// k(a, b) = signal_variance * exp(-0.5 * sum_d ((a_d - b_d) / l_d)^2).
pub fn kernel_eval(a: &ParameterPoint, b: &ParameterPoint, params: &KernelParams) -> f64 {
    let av = a.as_array();
    let bv = b.as_array();
    let mut q = 0.0;
    for d in 0..3 {
        let scaled = (av[d] - bv[d]) / params.length_scales[d];
        q += scaled * scaled;
    }
    params.signal_variance * (-0.5 * q).exp()
}

/// Observations plus their noise model. `noise_weight` multiplies every
/// per-observation variance before it enters the Gram diagonal, so zero turns
/// the model into noise-free interpolation regardless of the variances.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    inputs: Vec<ParameterPoint>,
    targets: Vec<f64>,
    noise_variances: Vec<f64>,
    noise_weight: f64,
}

impl TrainingSet {
    pub fn new(
        inputs: Vec<ParameterPoint>,
        targets: Vec<f64>,
        noise_variances: Vec<f64>,
        noise_weight: f64,
    ) -> Result<Self, GprError> {
        if inputs.is_empty() {
            return Err(GprError::EmptyTraining);
        }
        if inputs.len() != targets.len() || inputs.len() != noise_variances.len() {
            return Err(GprError::LengthMismatch);
        }
        if inputs.iter().any(|p| !p.is_valid()) {
            return Err(GprError::InvalidTraining("inputs must be finite and nonnegative"));
        }
        if targets.iter().any(|y| !y.is_finite()) {
            return Err(GprError::InvalidTraining("targets must be finite"));
        }
        if noise_variances.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(GprError::InvalidTraining("noise variances must be finite and nonnegative"));
        }
        if !(noise_weight.is_finite() && noise_weight >= 0.0) {
            return Err(GprError::InvalidTraining("noise weight must be finite and nonnegative"));
        }
        Ok(Self { inputs, targets, noise_variances, noise_weight })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[ParameterPoint] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn noise_variances(&self) -> &[f64] {
        &self.noise_variances
    }

    pub fn noise_weight(&self) -> f64 {
        self.noise_weight
    }
}

/// Predictive distribution at a single query point, on the original target scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub variance: f64,
}

/// Fitted model: Cholesky factor of the regularized Gram matrix plus the
/// precomputed weight vector, both on the standardized scale.
#[derive(Debug, Clone)]
pub struct GprModel {
    training: TrainingSet,
    kernel: KernelParams,
    target_mean: f64,
    target_scale: f64,
    factor: DMatrix<f64>,
    alpha: DVector<f64>,
}

/// Mean and scale for target standardization. A spread below 1e-9 relative to
/// the target magnitude counts as constant and forces scale 1 so constant
/// targets survive the round trip exactly.
fn standardization(targets: &[f64]) -> (f64, f64) {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let var = targets.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
    let scale = var.sqrt();
    if scale <= 1e-9 * mean.abs().max(1.0) {
        (mean, 1.0)
    } else {
        (mean, scale)
    }
}

fn standardized_targets(targets: &[f64], mean: f64, scale: f64) -> DVector<f64> {
    DVector::from_iterator(targets.len(), targets.iter().map(|y| (y - mean) / scale))
}

/// K + noise_weight * diag(sigma^2) / scale^2 + nugget * I.
fn regularized_gram(training: &TrainingSet, kernel: &KernelParams, scale: f64) -> DMatrix<f64> {
    let n = training.inputs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel_eval(&training.inputs[i], &training.inputs[j], kernel);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    let s2 = scale * scale;
    for i in 0..n {
        k[(i, i)] += training.noise_weight * training.noise_variances[i] / s2 + kernel.nugget;
    }
    k
}

fn coincident_inputs_disagree(training: &TrainingSet) -> bool {
    let n = training.inputs.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if training.inputs[i] == training.inputs[j]
                && training.targets[i] != training.targets[j]
            {
                return true;
            }
        }
    }
    false
}

/// Exact log marginal likelihood of the standardized targets under the given
/// kernel. No nugget escalation happens here: a non-positive-definite Gram
/// matrix is an error, which the hyperparameter search treats as -inf.
pub fn log_marginal_likelihood(
    training: &TrainingSet,
    kernel: &KernelParams,
) -> Result<f64, GprError> {
    kernel.validate()?;
    let (mean, scale) = standardization(&training.targets);
    let z = standardized_targets(&training.targets, mean, scale);
    let gram = regularized_gram(training, kernel, scale);
    let chol = nalgebra::Cholesky::new(gram)
        .ok_or(GprError::FactorizationFailure { nugget: kernel.nugget })?;
    let alpha = chol.solve(&z);
    let n = training.len();
    let half_log_det: f64 = (0..n).map(|i| chol.l_dirty()[(i, i)].ln()).sum();
    Ok(-0.5 * z.dot(&alpha) - half_log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Maximizes the log marginal likelihood over log signal variance and log
/// relative length scales, all boxed to [ln 0.1, ln 10]. Eight Nelder-Mead
/// restarts run serially: the box center first, then seven draws from a fixed
/// seed, so two fits of the same data give bitwise identical hyperparameters.
fn optimize_hyperparams(training: &TrainingSet, init: &KernelParams) -> KernelParams {
    let mut ranges = [1.0f64; 3];
    for d in 0..3 {
        let coords = training.inputs.iter().map(|p| p.as_array()[d]);
        let lo = coords.clone().fold(f64::INFINITY, f64::min);
        let hi = coords.fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        ranges[d] = if span > 0.0 { span } else { 1.0 };
    }

    let kernel_from = |theta: &[f64]| KernelParams {
        signal_variance: theta[0].exp(),
        length_scales: [
            theta[1].exp() * ranges[0],
            theta[2].exp() * ranges[1],
            theta[3].exp() * ranges[2],
        ],
        nugget: init.nugget,
    };
    let objective = |theta: &[f64]| match log_marginal_likelihood(training, &kernel_from(theta)) {
        Ok(v) if v.is_finite() => v,
        _ => f64::NEG_INFINITY,
    };

    let bounds = [(LOG_BOX_LO, LOG_BOX_HI); 4];
    let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for restart in 0..RESTART_COUNT {
        let start: Vec<f64> = if restart == 0 {
            vec![0.0; 4]
        } else {
            (0..4).map(|_| rng.random_range(LOG_BOX_LO..=LOG_BOX_HI)).collect()
        };
        let (theta, value) = nelder_mead_max(objective, &start, &bounds, RESTART_ITERATIONS);
        // Strict improvement only, so the earliest restart wins ties.
        if best.as_ref().is_none_or(|(_, v)| value > *v) {
            best = Some((theta, value));
        }
    }
    match best {
        Some((theta, value)) if value.is_finite() => kernel_from(&theta),
        _ => *init,
    }
}

/// Fits the model, standardizing targets and factorizing the regularized Gram
/// matrix. When factorization fails the nugget escalates tenfold per attempt
/// (starting at 1e-8 if configured as zero) up to 1e-2; the nugget actually
/// used is recorded in the returned model's kernel.
pub fn fit(
    training: TrainingSet,
    kernel_init: KernelParams,
    optimize: bool,
) -> Result<GprModel, GprError> {
    kernel_init.validate()?;
    if training.noise_weight == 0.0 && kernel_init.nugget == 0.0 && coincident_inputs_disagree(&training)
    {
        return Err(GprError::DegenerateInput);
    }

    let (target_mean, target_scale) = standardization(&training.targets);
    let z = standardized_targets(&training.targets, target_mean, target_scale);
    let kernel = if optimize { optimize_hyperparams(&training, &kernel_init) } else { kernel_init };

    let mut nugget = kernel.nugget;
    loop {
        let candidate = KernelParams { nugget, ..kernel };
        let gram = regularized_gram(&training, &candidate, target_scale);
        if let Some(chol) = nalgebra::Cholesky::new(gram) {
            let alpha = chol.solve(&z);
            return Ok(GprModel {
                training,
                kernel: candidate,
                target_mean,
                target_scale,
                factor: chol.unpack(),
                alpha,
            });
        }
        if nugget >= NUGGET_CEILING * 0.999 {
            return Err(GprError::FactorizationFailure { nugget });
        }
        nugget = if nugget == 0.0 { NUGGET_FLOOR } else { (nugget * 10.0).min(NUGGET_CEILING) };
    }
}

impl GprModel {
    pub fn training(&self) -> &TrainingSet {
        &self.training
    }

    /// Kernel actually used, including any escalated nugget.
    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn target_mean(&self) -> f64 {
        self.target_mean
    }

    pub fn target_scale(&self) -> f64 {
        self.target_scale
    }

    pub fn predict(&self, query: &ParameterPoint) -> Posterior {
        let n = self.training.len();
        let kstar = DVector::from_iterator(
            n,
            self.training.inputs.iter().map(|x| kernel_eval(query, x, &self.kernel)),
        );
        let mean_std = kstar.dot(&self.alpha);
        let v = self
            .factor
            .solve_lower_triangular(&kstar)
            .expect("Cholesky factor has a positive diagonal");
        let var_std = (self.kernel.signal_variance - v.norm_squared()).max(0.0);
        Posterior {
            mean: self.target_mean + self.target_scale * mean_std,
            variance: var_std * self.target_scale * self.target_scale,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pt(r: f64, t: f64, s: f64) -> ParameterPoint {
        ParameterPoint::new(r, t, s)
    }

    fn unit_kernel() -> KernelParams {
        KernelParams { signal_variance: 1.0, length_scales: [1.0, 1.0, 1.0], nugget: 0.0 }
    }

    #[test]
    fn kernel_at_identical_points_returns_signal_variance() {
        let k = KernelParams { signal_variance: 2.5, length_scales: [3.0, 1.0, 0.5], nugget: 0.1 };
        let p = pt(4.0, 2.0, 7.0);
        assert_eq!(kernel_eval(&p, &p, &k), 2.5);
    }

    #[test]
    fn kernel_at_unit_distance_matches_closed_form() {
        let k = unit_kernel();
        let v = kernel_eval(&pt(0.0, 0.0, 0.0), &pt(1.0, 0.0, 0.0), &k);
        assert_relative_eq!(v, 0.6065306597126334, max_relative = 1e-15);
    }

    #[test]
    fn kernel_decays_to_zero_far_away() {
        let k = unit_kernel();
        let v = kernel_eval(&pt(0.0, 0.0, 0.0), &pt(40.0, 0.0, 0.0), &k);
        assert!(v < 1e-300);
    }

    #[test]
    fn kernel_is_symmetric() {
        let k = KernelParams { signal_variance: 1.7, length_scales: [2.0, 5.0, 0.3], nugget: 0.0 };
        let a = pt(1.0, 2.0, 3.0);
        let b = pt(4.0, 0.5, 2.0);
        assert_eq!(kernel_eval(&a, &b, &k), kernel_eval(&b, &a, &k));
    }

    #[test]
    fn training_set_rejects_mismatched_lengths() {
        let err = TrainingSet::new(vec![pt(1.0, 2.0, 3.0)], vec![0.5, 0.6], vec![0.0], 0.1);
        assert_eq!(err.unwrap_err(), GprError::LengthMismatch);
    }

    #[test]
    fn training_set_rejects_empty_and_nonfinite() {
        assert_eq!(
            TrainingSet::new(vec![], vec![], vec![], 0.1).unwrap_err(),
            GprError::EmptyTraining
        );
        let err =
            TrainingSet::new(vec![pt(1.0, 2.0, 3.0)], vec![f64::NAN], vec![0.0], 0.1).unwrap_err();
        assert!(matches!(err, GprError::InvalidTraining(_)));
        let err =
            TrainingSet::new(vec![pt(1.0, 2.0, 3.0)], vec![0.5], vec![-1.0], 0.1).unwrap_err();
        assert!(matches!(err, GprError::InvalidTraining(_)));
    }

    #[test]
    fn single_observation_posterior_returns_target_at_input() {
        let training =
            TrainingSet::new(vec![pt(5.0, 1.0, 2.0)], vec![0.5], vec![0.0], 0.0).unwrap();
        let model = fit(training, unit_kernel(), false).unwrap();
        let at_input = model.predict(&pt(5.0, 1.0, 2.0));
        assert_relative_eq!(at_input.mean, 0.5, max_relative = 1e-12);
        assert!(at_input.variance.abs() < 1e-12);
        // A single target standardizes to zero, so the far-field mean is that target.
        let far = model.predict(&pt(500.0, 1.0, 2.0));
        assert_relative_eq!(far.mean, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn single_observation_variance_matches_hand_solved_system() {
        let kernel = KernelParams { signal_variance: 1.0, length_scales: [2.0, 2.0, 2.0], nugget: 1e-6 };
        let training =
            TrainingSet::new(vec![pt(0.0, 0.0, 0.0)], vec![1.0], vec![0.0], 0.0).unwrap();
        let model = fit(training, kernel, false).unwrap();
        let q = pt(1.0, 0.0, 0.0);
        let k_star = kernel_eval(&q, &pt(0.0, 0.0, 0.0), &kernel);
        let expected = 1.0 - k_star * k_star / (1.0 + 1e-6);
        assert_relative_eq!(model.predict(&q).variance, expected, max_relative = 1e-12);
        assert_relative_eq!(model.predict(&q).mean, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn noise_free_fit_interpolates_targets() {
        let inputs = vec![pt(12.0, 0.0, 0.0), pt(15.0, 4.0, 2.0), pt(18.0, 8.0, 5.0), pt(21.0, 2.0, 8.0)];
        let targets = vec![0.62, 0.81, 0.74, 0.55];
        let training = TrainingSet::new(inputs.clone(), targets.clone(), vec![0.0; 4], 0.0).unwrap();
        let kernel =
            KernelParams { signal_variance: 1.0, length_scales: [5.0, 5.0, 5.0], nugget: 1e-10 };
        let model = fit(training.clone(), kernel, false).unwrap();
        for (x, y) in inputs.iter().zip(&targets) {
            let p = model.predict(x);
            assert!((p.mean - y).abs() <= 1e-6, "mean {} target {}", p.mean, y);
        }

        // The variance bound at a training point is checked at the default
        // nugget, where it is not swamped by cancellation against the signal.
        let kernel =
            KernelParams { signal_variance: 1.0, length_scales: [5.0, 5.0, 5.0], nugget: 1e-8 };
        let model = fit(training, kernel, false).unwrap();
        for x in &inputs {
            let p = model.predict(x);
            let var_cap = 1e-8 * model.target_scale().powi(2) * (1.0 + 1e-6);
            assert!(p.variance <= var_cap, "variance {} cap {}", p.variance, var_cap);
        }
    }

    #[test]
    fn far_query_recovers_prior_mean_and_variance() {
        let training = TrainingSet::new(
            vec![pt(12.0, 0.0, 0.0), pt(14.0, 1.0, 1.0)],
            vec![0.3, 0.9],
            vec![0.0, 0.0],
            0.0,
        )
        .unwrap();
        let kernel =
            KernelParams { signal_variance: 2.0, length_scales: [1.0, 1.0, 1.0], nugget: 1e-8 };
        let model = fit(training, kernel, false).unwrap();
        let p = model.predict(&pt(300.0, 0.0, 0.0));
        let scale2 = model.target_scale().powi(2);
        assert!((p.mean - model.target_mean()).abs() < 1e-6);
        assert!((p.variance - 2.0 * scale2).abs() < 1e-6 * scale2);
    }

    #[test]
    fn log_marginal_likelihood_of_single_standardized_point_is_frozen_constant() {
        // One observation: z = 0, Gram = [1], so only the 2*pi term survives.
        let training =
            TrainingSet::new(vec![pt(1.0, 2.0, 3.0)], vec![0.7], vec![0.0], 0.0).unwrap();
        let lml = log_marginal_likelihood(&training, &unit_kernel()).unwrap();
        assert_relative_eq!(lml, -0.9189385332046727, max_relative = 1e-15);
    }

    #[test]
    fn log_marginal_likelihood_matches_dense_formula_on_three_points() {
        let training = TrainingSet::new(
            vec![pt(12.0, 0.0, 0.0), pt(15.0, 4.0, 3.0), pt(19.0, 7.0, 1.0)],
            vec![0.52, 0.88, 0.61],
            vec![0.004, 0.001, 0.009],
            0.1,
        )
        .unwrap();
        let kernel =
            KernelParams { signal_variance: 1.4, length_scales: [4.0, 3.0, 5.0], nugget: 1e-8 };
        let lml = log_marginal_likelihood(&training, &kernel).unwrap();

        let (mean, scale) = standardization(training.targets());
        let z = standardized_targets(training.targets(), mean, scale);
        let gram = regularized_gram(&training, &kernel, scale);
        let inv = gram.clone().try_inverse().unwrap();
        let n = training.len() as f64;
        let dense = -0.5 * z.dot(&(&inv * &z))
            - 0.5 * gram.determinant().ln()
            - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
        assert_relative_eq!(lml, dense, max_relative = 1e-8);
    }

    #[test]
    fn log_marginal_likelihood_is_smooth_in_the_nugget() {
        let training = TrainingSet::new(
            vec![pt(1.0, 0.0, 0.0), pt(2.0, 1.0, 0.0), pt(3.0, 0.0, 1.0)],
            vec![0.2, 0.5, 0.4],
            vec![0.0; 3],
            0.0,
        )
        .unwrap();
        let mut last = None;
        for nugget in [1e-8, 2e-8, 4e-8, 8e-8] {
            let kernel =
                KernelParams { signal_variance: 1.0, length_scales: [2.0, 2.0, 2.0], nugget };
            let lml = log_marginal_likelihood(&training, &kernel).unwrap();
            assert!(lml.is_finite());
            if let Some(prev) = last {
                let change: f64 = lml - prev;
                assert!(change.abs() < 1.0, "tiny nugget steps moved lml by {change}");
            }
            last = Some(lml);
        }
    }

    #[test]
    fn coincident_inputs_with_differing_targets_error_without_noise() {
        let training = TrainingSet::new(
            vec![pt(5.0, 5.0, 5.0), pt(5.0, 5.0, 5.0)],
            vec![0.0, 1.0],
            vec![0.0, 0.0],
            0.0,
        )
        .unwrap();
        assert_eq!(fit(training, unit_kernel(), false).unwrap_err(), GprError::DegenerateInput);
    }

    #[test]
    fn coincident_inputs_with_noise_fit_cleanly() {
        let training = TrainingSet::new(
            vec![pt(5.0, 5.0, 5.0), pt(5.0, 5.0, 5.0)],
            vec![0.0, 1.0],
            vec![0.02, 0.02],
            1.0,
        )
        .unwrap();
        let model = fit(training, unit_kernel(), false).unwrap();
        let p = model.predict(&pt(5.0, 5.0, 5.0));
        assert!(p.mean > 0.0 && p.mean < 1.0);
    }

    #[test]
    fn singular_gram_escalates_nugget_and_records_it() {
        // Identical inputs with identical targets: rank-one Gram, consistent system.
        let training = TrainingSet::new(
            vec![pt(5.0, 5.0, 5.0), pt(5.0, 5.0, 5.0)],
            vec![0.4, 0.4],
            vec![0.0, 0.0],
            0.0,
        )
        .unwrap();
        let model = fit(training, unit_kernel(), false).unwrap();
        assert_eq!(model.kernel().nugget, NUGGET_FLOOR);
        assert_relative_eq!(model.predict(&pt(5.0, 5.0, 5.0)).mean, 0.4, max_relative = 1e-6);
    }

    #[test]
    fn likelihood_never_escalates_the_nugget() {
        // Coincident inputs make the Gram singular at nugget zero; fit would
        // escalate, the exact likelihood must refuse instead.
        let training = TrainingSet::new(
            vec![pt(1.0, 1.0, 1.0), pt(1.0, 1.0, 1.0)],
            vec![0.4, 0.4],
            vec![0.0, 0.0],
            0.0,
        )
        .unwrap();
        let err = log_marginal_likelihood(&training, &unit_kernel()).unwrap_err();
        assert_eq!(err, GprError::FactorizationFailure { nugget: 0.0 });
    }

    #[test]
    fn fit_keeps_a_nugget_already_at_the_ceiling() {
        let training = TrainingSet::new(
            vec![pt(1.0, 1.0, 1.0), pt(1.0, 1.0, 1.0)],
            vec![0.4, 0.4],
            vec![0.0, 0.0],
            0.0,
        )
        .unwrap();
        let kernel = KernelParams {
            signal_variance: 1.0,
            length_scales: [1.0, 1.0, 1.0],
            nugget: NUGGET_CEILING,
        };
        let model = fit(training, kernel, false).unwrap();
        assert_eq!(model.kernel().nugget, NUGGET_CEILING);
    }

    #[test]
    fn hyperparameter_search_is_deterministic_and_improves_likelihood() {
        let inputs = vec![
            pt(11.0, 0.0, 0.0),
            pt(13.0, 2.0, 1.0),
            pt(15.0, 4.0, 3.0),
            pt(17.0, 6.0, 5.0),
            pt(19.0, 8.0, 7.0),
            pt(21.0, 1.0, 8.0),
        ];
        let targets = vec![0.35, 0.52, 0.78, 0.71, 0.48, 0.33];
        let noise = vec![0.002; 6];
        let training = TrainingSet::new(inputs, targets, noise, 0.1).unwrap();
        let init =
            KernelParams { signal_variance: 1.0, length_scales: [1.0, 1.0, 1.0], nugget: 1e-8 };

        let a = fit(training.clone(), init, true).unwrap();
        let b = fit(training.clone(), init, true).unwrap();
        assert_eq!(a.kernel(), b.kernel());

        let center = KernelParams {
            signal_variance: 1.0,
            length_scales: [10.0, 8.0, 8.0],
            nugget: 1e-8,
        };
        let tuned = log_marginal_likelihood(&training, a.kernel()).unwrap();
        let baseline = log_marginal_likelihood(&training, &center).unwrap();
        assert!(tuned >= baseline - 1e-9, "tuned {tuned} baseline {baseline}");
    }

    #[test]
    fn constant_targets_force_unit_scale() {
        let training = TrainingSet::new(
            vec![pt(1.0, 0.0, 0.0), pt(2.0, 0.0, 0.0), pt(3.0, 0.0, 0.0)],
            vec![0.1, 0.1, 0.1],
            vec![0.0; 3],
            0.0,
        )
        .unwrap();
        let kernel =
            KernelParams { signal_variance: 1.0, length_scales: [1.0, 1.0, 1.0], nugget: 1e-8 };
        let model = fit(training, kernel, false).unwrap();
        assert_eq!(model.target_scale(), 1.0);
        assert_relative_eq!(model.predict(&pt(2.0, 0.0, 0.0)).mean, 0.1, max_relative = 1e-9);
    }
}
