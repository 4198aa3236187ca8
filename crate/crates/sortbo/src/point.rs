//! Candidate configurations in the three-dimensional process-parameter space.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// One candidate configuration: reaction lines, extended time (lines) and
/// extended space (pixels). Coordinates are continuous; the plant itself only
/// accepts integer settings, see `acquisition::round_to_actuation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    /// Delay in camera lines between detection and nozzle activation.
    pub reaction_lines: f64,
    /// Symmetric bounding-box enlargement along the transport axis, in lines.
    pub extended_time: f64,
    /// Symmetric bounding-box enlargement across the belt, in pixels.
    pub extended_space: f64,
}

impl ParameterPoint {
    pub fn new(reaction_lines: f64, extended_time: f64, extended_space: f64) -> Self {
        Self { reaction_lines, extended_time, extended_space }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.reaction_lines, self.extended_time, self.extended_space]
    }

    pub fn from_array(c: [f64; 3]) -> Self {
        Self::new(c[0], c[1], c[2])
    }

    /// All coordinates finite and non-negative.
    pub fn is_valid(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite() && *v >= 0.0)
    }

    /// Lexicographic comparison, used as the deterministic tie-breaker in
    /// acquisition maximization. Coordinates must be non-NaN.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.as_array().iter().zip(other.as_array()) {
            match a.partial_cmp(&b).expect("parameter coordinates are never NaN") {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }

    /// Largest absolute per-coordinate difference (Chebyshev distance).
    pub fn chebyshev_distance(&self, other: &Self) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for ParameterPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {})",
            self.reaction_lines, self.extended_time, self.extended_space
        )
    }
}
