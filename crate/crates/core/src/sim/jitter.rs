use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SimError;

/// Rejection attempts for the truncated normal before falling back to a clamp.
const MAX_REJECTIONS: usize = 256;

/// Truncation half-width of the normal distribution, in standard deviations.
pub const NORMAL_TRUNCATION_SIGMAS: f64 = 4.0;

/// A latency or jitter distribution. All values are nanoseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JitterDist {
    Constant {
        value: i64,
    },
    /// Inclusive integer range.
    Uniform {
        min: i64,
        max: i64,
    },
    /// Normal truncated at `mean ± 4σ` and, when given, at `min`.
    Normal {
        mean: f64,
        stddev: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<i64>,
    },
    /// Discrete distribution over `(value, weight)` points.
    Empirical {
        points: Vec<(i64, f64)>,
    },
}

impl Default for JitterDist {
    fn default() -> Self {
        JitterDist::ZERO
    }
}

impl JitterDist {
    pub const ZERO: JitterDist = JitterDist::Constant { value: 0 };

    pub fn constant(value: i64) -> Self {
        JitterDist::Constant { value }
    }

    pub fn uniform(min: i64, max: i64) -> Self {
        JitterDist::Uniform { min, max }
    }

    pub fn normal(mean: f64, stddev: f64, min: Option<i64>) -> Self {
        JitterDist::Normal { mean, stddev, min }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |why: &str| Err(SimError::InvalidDistribution(why.to_string()));
        match self {
            JitterDist::Constant { .. } => Ok(()),
            JitterDist::Uniform { min, max } if min > max => bad("uniform: min > max"),
            JitterDist::Uniform { .. } => Ok(()),
            JitterDist::Normal { mean, stddev, min } => {
                if !mean.is_finite() || !stddev.is_finite() || *stddev < 0.0 {
                    return bad("normal: mean and stddev must be finite, stddev >= 0");
                }
                if let Some(lo) = min {
                    if (*lo as f64) > mean + NORMAL_TRUNCATION_SIGMAS * stddev {
                        return bad("normal: lower bound above the truncated support");
                    }
                }
                Ok(())
            }
            JitterDist::Empirical { points } => {
                if points.is_empty() {
                    return bad("empirical: no points");
                }
                if points.iter().any(|(_, w)| !w.is_finite() || *w < 0.0) {
                    return bad("empirical: weights must be finite and non-negative");
                }
                if points.iter().map(|(_, w)| w).sum::<f64>() <= 0.0 {
                    return bad("empirical: total weight must be positive");
                }
                Ok(())
            }
        }
    }

    /// Draw one sample. Deterministic given the distribution and RNG state;
    /// `Constant` does not touch the RNG.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        match self {
            JitterDist::Constant { value } => *value,
            JitterDist::Uniform { min, max } => rng.random_range(*min..=*max),
            JitterDist::Normal { mean, stddev, min } => {
                if *stddev == 0.0 {
                    let v = mean.round() as i64;
                    return min.map_or(v, |lo| v.max(lo));
                }
                let lo = min.map_or(f64::NEG_INFINITY, |m| m as f64);
                for _ in 0..MAX_REJECTIONS {
                    let z: f64 = StandardNormal.sample(rng);
                    if z.abs() > NORMAL_TRUNCATION_SIGMAS {
                        continue;
                    }
                    let x = mean + stddev * z;
                    if x < lo {
                        continue;
                    }
                    return x.round() as i64;
                }
                let v = mean.round() as i64;
                min.map_or(v, |m| v.max(m))
            }
            JitterDist::Empirical { points } => {
                let total: f64 = points.iter().map(|(_, w)| w).sum();
                let mut pick = rng.random::<f64>() * total;
                for (v, w) in points {
                    if pick < *w {
                        return *v;
                    }
                    pick -= w;
                }
                // rounding left us past the end
                points
                    .iter()
                    .rev()
                    .find(|(_, w)| *w > 0.0)
                    .map_or(0, |p| p.0)
            }
        }
    }

    /// Sample clamped at zero, for quantities that are latencies.
    pub fn sample_latency<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.sample(rng).max(0) as u64
    }

    /// Largest value the distribution can produce.
    pub fn upper_bound(&self) -> i64 {
        match self {
            JitterDist::Constant { value } => *value,
            JitterDist::Uniform { max, .. } => *max,
            JitterDist::Normal { mean, stddev, min } => {
                let hi = (mean + NORMAL_TRUNCATION_SIGMAS * stddev).round() as i64;
                min.map_or(hi, |m| hi.max(m))
            }
            JitterDist::Empirical { points } => points
                .iter()
                .filter(|(_, w)| *w > 0.0)
                .map(|p| p.0)
                .max()
                .unwrap_or(0),
        }
    }

    /// Smallest value the distribution can produce.
    pub fn lower_bound(&self) -> i64 {
        match self {
            JitterDist::Constant { value } => *value,
            JitterDist::Uniform { min, .. } => *min,
            JitterDist::Normal { mean, stddev, min } => {
                let lo = (mean - NORMAL_TRUNCATION_SIGMAS * stddev).round() as i64;
                min.map_or(lo, |m| lo.max(m))
            }
            JitterDist::Empirical { points } => points
                .iter()
                .filter(|(_, w)| *w > 0.0)
                .map(|p| p.0)
                .min()
                .unwrap_or(0),
        }
    }
}
