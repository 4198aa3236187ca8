//! Confusion-matrix accounting and the sorting quality/uncertainty formulas:
//! accuracy, normalized TP/TN rates, per-experiment aggregation and the
//! interval-variance power-law fit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::point::ParameterPoint;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    /// Accuracy is undefined on a matrix with no counts.
    #[error("confusion matrix is empty (all counts zero)")]
    EmptyMatrix,
    /// Aggregation needs at least two intervals with a defined rate per objective.
    #[error("fewer than 2 intervals with defined rates for objective `{objective}`")]
    InsufficientIntervals { objective: &'static str },
    /// The power-law fit is undefined when every interval length is identical.
    #[error("variance scaling fit is degenerate: all interval lengths equal")]
    DegenerateFit,
    /// Series handed to the power-law fit violated its preconditions.
    #[error("variance scaling fit needs >= 3 points with t > 0 and var > 0")]
    InvalidSeries,
}

/// Counts for one measurement interval or an aggregate of intervals.
///
/// `true_*` counts are objects that ended up in the correct output stream,
/// `false_negatives` are accept objects wrongly ejected into the reject
/// stream, `false_positives` are reject objects wrongly left on the belt.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positives: u64,
    pub false_negatives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        Self {
            true_positives: tp,
            false_negatives: fn_,
            false_positives: fp,
            true_negatives: tn,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_positives + self.false_negatives + self.false_positives + self.true_negatives
    }

    /// Fraction of all objects sorted into the correct stream.
    pub fn accuracy(&self) -> Result<f64, MetricsError> {
        let n = self.total();
        if n == 0 {
            return Err(MetricsError::EmptyMatrix);
        }
        Ok((self.true_positives + self.true_negatives) as f64 / n as f64)
    }

    /// Normalized TP and TN: recall of the accept class and of the reject
    /// class. A rate with an empty denominator is `None` and is excluded from
    /// aggregation instead of being forced to 0 or 1.
    pub fn normalized_rates(&self) -> (Option<f64>, Option<f64>) {
        let accept_total = self.true_positives + self.false_negatives;
        let reject_total = self.true_negatives + self.false_positives;
        let tp_n = (accept_total > 0).then(|| self.true_positives as f64 / accept_total as f64);
        let tn_n = (reject_total > 0).then(|| self.true_negatives as f64 / reject_total as f64);
        (tp_n, tn_n)
    }

    /// Component-wise sum, used when re-bucketing intervals.
    pub fn merged(&self, other: &Self) -> Self {
        Self {
            true_positives: self.true_positives + other.true_positives,
            false_negatives: self.false_negatives + other.false_negatives,
            false_positives: self.false_positives + other.false_positives,
            true_negatives: self.true_negatives + other.true_negatives,
        }
    }
}

/// Confusion counts for one fixed-length measurement interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalResult {
    pub confusion: ConfusionMatrix,
    pub duration_s: f64,
}

/// One sorting experiment: the actuated parameters, per-interval detail and
/// the aggregate statistics the surrogate models are trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub params: ParameterPoint,
    pub intervals: Vec<IntervalResult>,
    pub tp_n_mean: f64,
    pub tn_n_mean: f64,
    pub tp_n_var: f64,
    pub tn_n_var: f64,
    /// Virtual plant clock: seconds of simulated experiment time elapsed at
    /// the start of this experiment, counted from the start of its run.
    pub timestamp: f64,
}

/// Binomial variance of an accuracy estimate p over n_total objects.
pub fn accuracy_variance(p: f64, n_total: u64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p) && n_total >= 1);
    p * (1.0 - p) / n_total as f64
}

/// Mean and unbiased sample variance. Caller guarantees `xs.len() >= 2`.
fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Averages per-interval normalized rates into an [`ExperimentRecord`].
/// Intervals with an undefined rate are excluded per objective. The caller
/// stamps `timestamp` afterwards; it is initialized to 0.
pub fn aggregate_experiment(
    params: ParameterPoint,
    intervals: &[IntervalResult],
) -> Result<ExperimentRecord, MetricsError> {
    let mut tp_rates = Vec::with_capacity(intervals.len());
    let mut tn_rates = Vec::with_capacity(intervals.len());
    for interval in intervals {
        let (tp_n, tn_n) = interval.confusion.normalized_rates();
        tp_rates.extend(tp_n);
        tn_rates.extend(tn_n);
    }
    if tp_rates.len() < 2 {
        return Err(MetricsError::InsufficientIntervals { objective: "tp_n" });
    }
    if tn_rates.len() < 2 {
        return Err(MetricsError::InsufficientIntervals { objective: "tn_n" });
    }
    let (tp_n_mean, tp_n_var) = mean_and_variance(&tp_rates);
    let (tn_n_mean, tn_n_var) = mean_and_variance(&tn_rates);
    Ok(ExperimentRecord {
        params,
        intervals: intervals.to_vec(),
        tp_n_mean,
        tn_n_mean,
        tp_n_var,
        tn_n_var,
        timestamp: 0.0,
    })
}

/// Ordinary least-squares slope of log(var) against log(t). A clean 1/t
/// power law gives slope -1.
pub fn variance_scaling_fit(series: &[(f64, f64)]) -> Result<f64, MetricsError> {
    if series.len() < 3
        || series
            .iter()
            .any(|(t, v)| !(t.is_finite() && v.is_finite() && *t > 0.0 && *v > 0.0))
    {
        return Err(MetricsError::InvalidSeries);
    }
    let first_t = series[0].0;
    if series.iter().all(|(t, _)| *t == first_t) {
        return Err(MetricsError::DegenerateFit);
    }
    let xs: Vec<f64> = series.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = series.iter().map(|(_, v)| v.ln()).collect();
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    Ok(sxy / sxx)
}
