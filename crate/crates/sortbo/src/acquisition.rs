//! Expected Improvement acquisition over the accept/reject surrogate pair and
//! its deterministic maximization over a box-constrained search space.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::gpr::{GprModel, Posterior};
use crate::local_search::pattern_search_max;
use crate::point::ParameterPoint;

const SQRT_TWO_PI: f64 = 2.5066282746310002;
/// Dense seeding grid: 32 points per non-degenerate dimension, endpoints included.
const GRID_RESOLUTION: usize = 32;
/// Local refinement starts from this many best grid cells.
const REFINE_SEEDS: usize = 5;
const REFINE_PASSES: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum AcquisitionError {
    #[error("weights must lie in [0, 1] and sum to 1 within 1e-12")]
    InvalidWeights,
    #[error("search space lower bound exceeds upper bound")]
    InvalidBounds,
}

/// Axis-aligned box the acquisition argmax is constrained to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpace {
    pub lower: ParameterPoint,
    pub upper: ParameterPoint,
}

impl SearchSpace {
    pub fn new(lower: ParameterPoint, upper: ParameterPoint) -> Result<Self, AcquisitionError> {
        let lo = lower.as_array();
        let hi = upper.as_array();
        if !lower.is_valid() || !upper.is_valid() || lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(AcquisitionError::InvalidBounds);
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, p: &ParameterPoint) -> bool {
        let x = p.as_array();
        let lo = self.lower.as_array();
        let hi = self.upper.as_array();
        (0..3).all(|d| x[d] >= lo[d] && x[d] <= hi[d])
    }
}

/// Convex weighting of the two per-objective acquisitions.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombinedWeights {
    pub w_accept: f64,
    pub w_reject: f64,
}

impl CombinedWeights {
    pub fn new(w_accept: f64, w_reject: f64) -> Result<Self, AcquisitionError> {
        let w = Self { w_accept, w_reject };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), AcquisitionError> {
        let in_unit = |w: f64| w.is_finite() && (0.0..=1.0).contains(&w);
        if !in_unit(self.w_accept)
            || !in_unit(self.w_reject)
            || (self.w_accept + self.w_reject - 1.0).abs() > 1e-12
        {
            return Err(AcquisitionError::InvalidWeights);
        }
        Ok(())
    }
}

/// Best observed per-experiment means of the two objectives, the improvement
/// baselines for their respective surrogates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionState {
    pub best_accept: f64,
    pub best_reject: f64,
}

/// Maximization-form Expected Improvement. With delta = mean - f_best and
/// sigma the posterior standard deviation: delta*CDF(delta/sigma) +
/// sigma*pdf(delta/sigma) for sigma > 0, max(delta, 0) at sigma = 0.
pub fn expected_improvement(posterior: Posterior, f_best: f64) -> f64 {
    let delta = posterior.mean - f_best;
    let sigma = posterior.variance.max(0.0).sqrt();
    if sigma > 0.0 {
        let z = delta / sigma;
        let normal = Normal::new(0.0, 1.0).expect("unit normal parameters are valid");
        let pdf = (-0.5 * z * z).exp() / SQRT_TWO_PI;
        (delta * normal.cdf(z) + sigma * pdf).max(0.0)
    } else {
        delta.max(0.0)
    }
}

/// w_accept * EI_accept + w_reject * EI_reject. A weight of exactly zero
/// never consults its model.
pub fn combined_ei(
    x: &ParameterPoint,
    model_accept: &GprModel,
    model_reject: &GprModel,
    state: &AcquisitionState,
    weights: &CombinedWeights,
) -> f64 {
    let mut total = 0.0;
    if weights.w_accept != 0.0 {
        total += weights.w_accept
            * expected_improvement(model_accept.predict(x), state.best_accept);
    }
    if weights.w_reject != 0.0 {
        total += weights.w_reject
            * expected_improvement(model_reject.predict(x), state.best_reject);
    }
    total
}

fn value_key(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Total order used everywhere a maximizer picks a winner: higher value first,
/// lexicographically smaller point on exact ties. Makes parallel reduction
/// order-independent.
fn better(a: &(ParameterPoint, f64), b: &(ParameterPoint, f64)) -> bool {
    match value_key(a.1).partial_cmp(&value_key(b.1)).expect("keys are never NaN") {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => a.0.lex_cmp(&b.0) == std::cmp::Ordering::Less,
    }
}

/// Two-phase deterministic maximization of an arbitrary objective over the
/// space: dense grid seed, then pattern-search refinement from the best cells.
/// Degenerate dimensions collapse to a single grid value and are never moved.
pub(crate) fn maximize_over_space<F>(space: &SearchSpace, objective: F) -> (ParameterPoint, f64)
where
    F: Fn(&ParameterPoint) -> f64 + Sync,
{
    let lo = space.lower.as_array();
    let hi = space.upper.as_array();
    let mut axes: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut cell = [0.0f64; 3];
    for d in 0..3 {
        if hi[d] > lo[d] {
            let step = (hi[d] - lo[d]) / (GRID_RESOLUTION - 1) as f64;
            cell[d] = step;
            axes[d] = (0..GRID_RESOLUTION)
                .map(|i| if i == GRID_RESOLUTION - 1 { hi[d] } else { lo[d] + i as f64 * step })
                .collect();
        } else {
            axes[d] = vec![lo[d]];
        }
    }

    let (na, nb, nc) = (axes[0].len(), axes[1].len(), axes[2].len());
    let mut graded: Vec<(ParameterPoint, f64)> = (0..na * nb * nc)
        .into_par_iter()
        .map(|idx| {
            let i = idx / (nb * nc);
            let j = (idx / nc) % nb;
            let k = idx % nc;
            let p = ParameterPoint::new(axes[0][i], axes[1][j], axes[2][k]);
            let v = objective(&p);
            (p, v)
        })
        .collect();
    graded.sort_by(|a, b| {
        value_key(b.1)
            .partial_cmp(&value_key(a.1))
            .expect("keys are never NaN")
            .then_with(|| a.0.lex_cmp(&b.0))
    });

    let bounds = [(lo[0], hi[0]), (lo[1], hi[1]), (lo[2], hi[2])];
    let min_step: Vec<f64> = cell.iter().map(|c| (c * 1e-7).max(1e-12)).collect();
    let mut best = graded[0];
    for (seed, _) in graded.iter().take(REFINE_SEEDS) {
        let (x, v) = pattern_search_max(
            |x| objective(&ParameterPoint::from_array([x[0], x[1], x[2]])),
            &seed.as_array(),
            &bounds,
            &cell,
            &min_step,
            REFINE_PASSES,
        );
        let candidate = (ParameterPoint::from_array([x[0], x[1], x[2]]), v);
        if better(&candidate, &best) {
            best = candidate;
        }
    }
    best
}

/// Argmax of the combined EI over the space; returns the point and its value.
pub fn maximize_combined_ei(
    model_accept: &GprModel,
    model_reject: &GprModel,
    state: &AcquisitionState,
    weights: &CombinedWeights,
    space: &SearchSpace,
) -> (ParameterPoint, f64) {
    maximize_over_space(space, |x| combined_ei(x, model_accept, model_reject, state, weights))
}

/// Rounds each coordinate half away from zero to the nearest integer, then
/// pulls any coordinate that left the space back to the nearest integer
/// inside it.
pub fn round_to_actuation(x: &ParameterPoint, space: &SearchSpace) -> ParameterPoint {
    let v = x.as_array();
    let lo = space.lower.as_array();
    let hi = space.upper.as_array();
    let mut out = [0.0f64; 3];
    for d in 0..3 {
        let mut r = v[d].round();
        if r > hi[d] {
            r = hi[d].floor();
        }
        if r < lo[d] {
            r = lo[d].ceil();
        }
        out[d] = r;
    }
    ParameterPoint::from_array(out)
}
