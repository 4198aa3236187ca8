//! Deterministic virtual sorting plant.
//!
//! Objects arrive on a conveyor as two Poisson streams (accept and reject
//! class), are detected perfectly at the inspection line, and are ejected by a
//! bar of pneumatic nozzles after a configured reaction delay. Time is
//! measured in camera lines; the belt advances one line of travel per line
//! period, so lines, pixels along the travel axis, and (via the line
//! frequency) seconds are interchangeable.
//!
//! Everything is a pure function of the configuration, parameters, and seed:
//! the object stream and the per-object jitter draws depend only on the seed,
//! never on the actuation parameters, so parameter sweeps see identical
//! material.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{ConfusionMatrix, IntervalResult};
use crate::point::ParameterPoint;

#[derive(Debug, Error, PartialEq)]
pub enum SimulatorError {
    #[error("invalid simulator configuration: {0}")]
    Config(&'static str),
    #[error("durations must be positive and interval_s must divide duration_s")]
    Schedule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Accept,
    Reject,
}

/// Axis-aligned object extent: x across the belt in pixels, y along the
/// travel axis in lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimObject {
    pub class_label: ClassLabel,
    pub bbox: BoundingBox,
    pub arrival_line: i64,
}

/// Closed interval for uniform size draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorConfig {
    /// Camera line rate in Hz; converts lines to seconds.
    pub line_frequency: f64,
    /// Belt travel per line period. The plant model assumes exactly 1.
    pub belt_speed: f64,
    /// Lateral distance between adjacent nozzle centers, in pixels.
    pub nozzle_pitch: f64,
    pub nozzle_count: u32,
    /// Fixed valve actuation delay, in lines.
    pub nozzle_delay_lines: f64,
    /// Standard deviation of the per-object timing jitter, in lines.
    pub jitter_std_lines: f64,
    /// Ground-truth transit time from inspection line to nozzle bar, in lines.
    pub true_transit_lines: f64,
    pub arrival_rate_accept: f64,
    pub arrival_rate_reject: f64,
    pub object_length_lines: SizeRange,
    pub object_width_pixels: SizeRange,
    pub belt_width_pixels: u32,
    /// Fraction of an object's space-time footprint the air blast must cover
    /// to eject it.
    pub hit_coverage_threshold: f64,
    pub seed: u64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self {
            line_frequency: 500.0,
            belt_speed: 1.0,
            nozzle_pitch: 8.0,
            nozzle_count: 12,
            nozzle_delay_lines: 1.5,
            // Large enough that time extension alone cannot fully compensate
            // a multi-line reaction-time error; keeps the optimum identifiable
            // in all three parameters.
            jitter_std_lines: 4.5,
            true_transit_lines: 13.5,
            arrival_rate_accept: 12.0,
            arrival_rate_reject: 3.0,
            object_length_lines: SizeRange { min: 3.0, max: 9.0 },
            object_width_pixels: SizeRange { min: 8.0, max: 16.0 },
            belt_width_pixels: 96,
            hit_coverage_threshold: 0.5,
            seed: 42,
        }
    }
}

impl SimulatorConfig {
    pub fn validate(&self) -> Result<(), SimulatorError> {
        if !(self.line_frequency.is_finite() && self.line_frequency > 0.0) {
            return Err(SimulatorError::Config("line_frequency must be positive"));
        }
        if self.belt_speed != 1.0 {
            return Err(SimulatorError::Config("belt_speed is fixed at 1 line of travel per line"));
        }
        if !(self.nozzle_pitch.is_finite() && self.nozzle_pitch >= 1.0) {
            return Err(SimulatorError::Config("nozzle_pitch must be at least 1 pixel"));
        }
        if self.nozzle_count == 0 {
            return Err(SimulatorError::Config("nozzle_count must be positive"));
        }
        if !self.nozzle_delay_lines.is_finite() || !self.true_transit_lines.is_finite() {
            return Err(SimulatorError::Config("delay and transit times must be finite"));
        }
        if !(self.jitter_std_lines.is_finite() && self.jitter_std_lines >= 0.0) {
            return Err(SimulatorError::Config("jitter_std_lines must be nonnegative"));
        }
        if !(self.arrival_rate_accept.is_finite() && self.arrival_rate_accept >= 0.0)
            || !(self.arrival_rate_reject.is_finite() && self.arrival_rate_reject >= 0.0)
        {
            return Err(SimulatorError::Config("arrival rates must be nonnegative"));
        }
        for (range, name) in [
            (&self.object_length_lines, "object_length_lines"),
            (&self.object_width_pixels, "object_width_pixels"),
        ] {
            if !(range.min.is_finite() && range.max.is_finite() && range.min > 0.0)
                || range.min > range.max
            {
                let msg = if name == "object_length_lines" {
                    "object_length_lines must satisfy 0 < min <= max"
                } else {
                    "object_width_pixels must satisfy 0 < min <= max"
                };
                return Err(SimulatorError::Config(msg));
            }
        }
        if self.belt_width_pixels == 0 {
            return Err(SimulatorError::Config("belt_width_pixels must be positive"));
        }
        if self.object_width_pixels.max > self.belt_width_pixels as f64 {
            return Err(SimulatorError::Config("object_width_pixels.max exceeds the belt width"));
        }
        if !(self.hit_coverage_threshold > 0.0 && self.hit_coverage_threshold <= 1.0) {
            return Err(SimulatorError::Config("hit_coverage_threshold must be in (0, 1]"));
        }
        Ok(())
    }
}

/// SplitMix64-style mixer deriving independent substream seeds from a base
/// seed and an ordinal. Consecutive ordinals give uncorrelated streams.
pub fn mix_seed(base: u64, ordinal: u64) -> u64 {
    let mut z = base ^ ordinal.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const STREAM_ACCEPT: u64 = 0x41;
const STREAM_REJECT: u64 = 0x52;
const STREAM_JITTER: u64 = 0x4a;

/// Symmetric enlargement: half the spatial extension on each side, half the
/// temporal extension before and after. Spatial coordinates clamp to the belt.
pub fn extend_bounding_box(
    bbox: &BoundingBox,
    params: &ParameterPoint,
    belt_width_pixels: f64,
) -> BoundingBox {
    BoundingBox {
        x_min: (bbox.x_min - params.extended_space / 2.0).max(0.0),
        y_min: bbox.y_min - params.extended_time / 2.0,
        x_max: (bbox.x_max + params.extended_space / 2.0).min(belt_width_pixels),
        y_max: bbox.y_max + params.extended_time / 2.0,
    }
}

/// T_R + nozzle delay + jitter, all in lines.
pub fn effective_reaction(
    params: &ParameterPoint,
    config: &SimulatorConfig,
    jitter_draw: f64,
) -> f64 {
    params.reaction_lines + config.nozzle_delay_lines + jitter_draw
}

fn draw_class_stream(
    rng: &mut ChaCha8Rng,
    config: &SimulatorConfig,
    class_label: ClassLabel,
    rate_per_s: f64,
    duration_s: f64,
) -> Vec<SimObject> {
    let mut objects = Vec::new();
    if rate_per_s <= 0.0 {
        return objects;
    }
    let gaps = Exp::new(rate_per_s).expect("positive rate");
    let belt = config.belt_width_pixels as f64;
    let mut arrival_s = 0.0;
    loop {
        arrival_s += gaps.sample(rng);
        if arrival_s > duration_s {
            return objects;
        }
        let length = rng.random_range(config.object_length_lines.min..=config.object_length_lines.max);
        let width = rng.random_range(config.object_width_pixels.min..=config.object_width_pixels.max);
        let x_min = rng.random_range(0.0..=(belt - width));
        let y_min = arrival_s * config.line_frequency;
        objects.push(SimObject {
            class_label,
            bbox: BoundingBox {
                x_min,
                y_min,
                x_max: (x_min + width).min(belt),
                y_max: y_min + length,
            },
            arrival_line: y_min.floor() as i64,
        });
    }
}

/// Generates both class streams for the given horizon, merged in arrival
/// order (accept before reject on exact ties). Fully determined by the
/// configured seed; each class has its own substream so changing one rate
/// leaves the other stream unchanged.
pub fn generate_stream(config: &SimulatorConfig, duration_s: f64) -> Vec<SimObject> {
    let mut accept_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, STREAM_ACCEPT));
    let mut reject_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, STREAM_REJECT));
    let accepts = draw_class_stream(
        &mut accept_rng,
        config,
        ClassLabel::Accept,
        config.arrival_rate_accept,
        duration_s,
    );
    let rejects = draw_class_stream(
        &mut reject_rng,
        config,
        ClassLabel::Reject,
        config.arrival_rate_reject,
        duration_s,
    );

    let mut merged = Vec::with_capacity(accepts.len() + rejects.len());
    let (mut i, mut j) = (0, 0);
    while i < accepts.len() && j < rejects.len() {
        if accepts[i].bbox.y_min <= rejects[j].bbox.y_min {
            merged.push(accepts[i]);
            i += 1;
        } else {
            merged.push(rejects[j]);
            j += 1;
        }
    }
    merged.extend_from_slice(&accepts[i..]);
    merged.extend_from_slice(&rejects[j..]);
    merged
}

/// One nozzle-bar firing: a lateral run of whole nozzle cells held open over
/// a window of lines.
#[derive(Debug, Clone, Copy)]
struct Activation {
    x_min: f64,
    x_max: f64,
    t_min: f64,
    t_max: f64,
}

/// Nozzles fire when their center points lie inside the extended box; the air
/// from each fired nozzle covers its whole pitch cell. Returns None when no
/// nozzle center falls inside the box.
fn activation_for(extended: &BoundingBox, params: &ParameterPoint, config: &SimulatorConfig) -> Option<Activation> {
    let pitch = config.nozzle_pitch;
    let mut first = None;
    let mut last = None;
    for j in 0..config.nozzle_count as i64 {
        let center = (j as f64 + 0.5) * pitch;
        if center >= extended.x_min && center <= extended.x_max {
            if first.is_none() {
                first = Some(j);
            }
            last = Some(j);
        }
    }
    let (first, last) = (first?, last?);
    Some(Activation {
        x_min: first as f64 * pitch,
        x_max: (last + 1) as f64 * pitch,
        t_min: extended.y_min + params.reaction_lines,
        t_max: extended.y_max + params.reaction_lines,
    })
}

/// Fraction of the footprint rectangle covered by the union of the given
/// activations. Exact rectangle-union area: sweep the x edges, merge the
/// t-intervals alive in each slab.
fn coverage_fraction(
    fp_x: (f64, f64),
    fp_t: (f64, f64),
    hits: &[Activation],
) -> f64 {
    let fp_area = (fp_x.1 - fp_x.0) * (fp_t.1 - fp_t.0);
    if fp_area <= 0.0 || hits.is_empty() {
        return 0.0;
    }
    // Clip to the footprint; drop empty slivers.
    let mut clipped: Vec<Activation> = Vec::with_capacity(hits.len());
    for h in hits {
        let x0 = h.x_min.max(fp_x.0);
        let x1 = h.x_max.min(fp_x.1);
        let t0 = h.t_min.max(fp_t.0);
        let t1 = h.t_max.min(fp_t.1);
        if x1 > x0 && t1 > t0 {
            clipped.push(Activation { x_min: x0, x_max: x1, t_min: t0, t_max: t1 });
        }
    }
    if clipped.is_empty() {
        return 0.0;
    }

    let mut edges: Vec<f64> = clipped.iter().flat_map(|c| [c.x_min, c.x_max]).collect();
    edges.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    edges.dedup();

    let mut area = 0.0;
    let mut spans: Vec<(f64, f64)> = Vec::new();
    for pair in edges.windows(2) {
        let (xa, xb) = (pair[0], pair[1]);
        if xb <= xa {
            continue;
        }
        let mid = 0.5 * (xa + xb);
        spans.clear();
        spans.extend(
            clipped
                .iter()
                .filter(|c| c.x_min <= mid && mid < c.x_max)
                .map(|c| (c.t_min, c.t_max)),
        );
        if spans.is_empty() {
            continue;
        }
        spans.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
        let mut merged_len = 0.0;
        let (mut lo, mut hi) = spans[0];
        for &(t0, t1) in &spans[1..] {
            if t0 > hi {
                merged_len += hi - lo;
                lo = t0;
                hi = t1;
            } else if t1 > hi {
                hi = t1;
            }
        }
        merged_len += hi - lo;
        area += merged_len * (xb - xa);
    }
    area / fp_area
}

/// Runs one sorting experiment and buckets the outcome into fixed intervals.
///
/// Every reject-class object raises one activation from its extended box.
/// Every object, regardless of class, is then tested against the union of all
/// activations: the air stream does not know which object it was aimed at.
/// An object is counted iff its true footprint window lies inside the
/// experiment duration. Counting uses recall semantics per class: a retained
/// accept is a true positive, an ejected accept a false negative, an ejected
/// reject a true negative, a retained reject a false positive.
pub fn run_experiment(
    config: &SimulatorConfig,
    params: &ParameterPoint,
    duration_s: u32,
    interval_s: u32,
) -> Result<Vec<IntervalResult>, SimulatorError> {
    config.validate()?;
    if !params.is_valid() {
        return Err(SimulatorError::Config("parameters must be finite and nonnegative"));
    }
    if duration_s == 0 || interval_s == 0 || !duration_s.is_multiple_of(interval_s) {
        return Err(SimulatorError::Schedule);
    }

    let objects = generate_stream(config, duration_s as f64);
    // One jitter draw per object in stream order, from a dedicated substream,
    // so the draws depend on the seed alone.
    let mut jitter_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, STREAM_JITTER));
    let jitters: Vec<f64> = (0..objects.len())
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut jitter_rng);
            config.jitter_std_lines * z
        })
        .collect();

    let belt = config.belt_width_pixels as f64;
    let mut activations: Vec<Activation> = objects
        .iter()
        .filter(|o| o.class_label == ClassLabel::Reject)
        .filter_map(|o| {
            let extended = extend_bounding_box(&o.bbox, params, belt);
            activation_for(&extended, params, config)
        })
        .collect();
    activations.sort_by(|a, b| a.t_min.partial_cmp(&b.t_min).expect("finite times"));
    let max_window = activations
        .iter()
        .map(|a| a.t_max - a.t_min)
        .fold(0.0f64, f64::max);

    let duration_lines = duration_s as f64 * config.line_frequency;
    let interval_lines = interval_s as f64 * config.line_frequency;
    let n_intervals = (duration_s / interval_s) as usize;
    // (tp, fn, fp, tn) per interval.
    let mut counts = vec![[0u64; 4]; n_intervals];

    for (object, jitter) in objects.iter().zip(&jitters) {
        let shift = config.true_transit_lines + config.nozzle_delay_lines + jitter;
        let t0 = object.bbox.y_min + shift;
        let t1 = object.bbox.y_max + shift;
        if t0 < 0.0 || t1 > duration_lines {
            continue;
        }

        // Activations start no earlier than their own t_min and can reach the
        // footprint only if t_max >= t0, so the scan window below suffices.
        let start = activations.partition_point(|a| a.t_min < t0 - max_window);
        let mut hits: Vec<Activation> = Vec::new();
        for a in &activations[start..] {
            if a.t_min > t1 {
                break;
            }
            if a.t_max >= t0 {
                hits.push(*a);
            }
        }
        let covered = coverage_fraction(
            (object.bbox.x_min, object.bbox.x_max),
            (t0, t1),
            &hits,
        );
        let ejected = covered >= config.hit_coverage_threshold;

        let bucket = ((t0 / interval_lines) as usize).min(n_intervals - 1);
        let slot = match (object.class_label, ejected) {
            (ClassLabel::Accept, false) => 0,
            (ClassLabel::Accept, true) => 1,
            (ClassLabel::Reject, false) => 2,
            (ClassLabel::Reject, true) => 3,
        };
        counts[bucket][slot] += 1;
    }

    Ok(counts
        .into_iter()
        .map(|[tp, fn_, fp, tn]| IntervalResult {
            confusion: ConfusionMatrix::new(tp, fn_, fp, tn),
            duration_s: interval_s as f64,
        })
        .collect())
}
