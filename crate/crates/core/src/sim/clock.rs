//! Node clocks: offset plus linear drift since the last synchronization.
//!
//! A reading at true time `t` is
//! `t + offset + drift * (t - last_sync) / 1e9` with drift held in parts per
//! billion and the product computed in 128-bit integers, truncated toward
//! zero. Synchronization replaces the offset with a sampled residual.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::jitter::JitterDist;
use super::time::SimTime;

const PPB_SCALE: i128 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ClockModel {
    pub offset_ns: i64,
    /// Frequency error in parts per billion (1 ppm = 1000 ppb).
    pub drift_ppb: i64,
    pub sync_interval_ns: Option<u64>,
    pub sync_residual: JitterDist,
    pub last_sync_true_time: SimTime,
}

impl Default for ClockModel {
    fn default() -> Self {
        Self::identity()
    }
}

impl ClockModel {
    pub fn identity() -> Self {
        ClockModel {
            offset_ns: 0,
            drift_ppb: 0,
            sync_interval_ns: None,
            sync_residual: JitterDist::ZERO,
            last_sync_true_time: SimTime::ZERO,
        }
    }

    pub fn with_offset(offset_ns: i64) -> Self {
        ClockModel {
            offset_ns,
            ..Self::identity()
        }
    }

    pub fn with_drift_ppm(drift_ppm: i64) -> Self {
        ClockModel {
            drift_ppb: drift_ppm * 1_000,
            ..Self::identity()
        }
    }

    pub fn is_identity(&self) -> bool {
        self.offset_ns == 0 && self.drift_ppb == 0 && self.sync_interval_ns.is_none()
    }

    fn read_signed(&self, true_time: SimTime) -> i128 {
        let t = true_time.0 as i128;
        let elapsed = t - self.last_sync_true_time.0 as i128;
        t + self.offset_ns as i128 + elapsed * self.drift_ppb as i128 / PPB_SCALE
    }

    /// Clock reading at `true_time`, saturating at the epoch.
    pub fn read(&self, true_time: SimTime) -> SimTime {
        SimTime(self.read_signed(true_time).clamp(0, u64::MAX as i128) as u64)
    }

    /// Reading minus true time.
    pub fn error_at(&self, true_time: SimTime) -> i64 {
        (self.read_signed(true_time) - true_time.0 as i128) as i64
    }

    /// Earliest true time, not before the last sync, at which the clock reads
    /// at least `reading`. Assumes the current sync segment extends forever.
    pub fn true_time_for(&self, reading: SimTime) -> SimTime {
        let ls = self.last_sync_true_time.0 as i128;
        let target = reading.0 as i128;
        let rel = target - ls - self.offset_ns as i128;
        let guess = ls + rel * PPB_SCALE / (PPB_SCALE + self.drift_ppb as i128);
        let mut t = guess.max(ls).max(0);
        while self.read_signed(SimTime(t as u64)) < target {
            t += 1;
        }
        while t > ls.max(0) && self.read_signed(SimTime((t - 1) as u64)) >= target {
            t -= 1;
        }
        SimTime(t as u64)
    }

    /// Replace the offset with a residual sample and restart drift accumulation.
    pub fn apply_sync<R: Rng + ?Sized>(&mut self, true_time: SimTime, rng: &mut R) {
        self.offset_ns = self.sync_residual.sample(rng);
        self.last_sync_true_time = true_time;
    }
}

/// Scenario-file form of a clock.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockConfig {
    #[serde(default)]
    pub offset_ns: i64,
    /// Drift in ppm; resolved to whole parts per billion.
    #[serde(default)]
    pub drift_ppm: f64,
    #[serde(default)]
    pub sync_interval_ns: Option<u64>,
    #[serde(default)]
    pub sync_residual: JitterDist,
}

impl ClockConfig {
    pub fn build(&self) -> ClockModel {
        ClockModel {
            offset_ns: self.offset_ns,
            drift_ppb: (self.drift_ppm * 1_000.0).round() as i64,
            sync_interval_ns: self.sync_interval_ns,
            sync_residual: self.sync_residual.clone(),
            last_sync_true_time: SimTime::ZERO,
        }
    }
}
