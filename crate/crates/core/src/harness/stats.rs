use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::HarnessError;

pub const DEFAULT_BIN_WIDTH_NS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub start_ns: i64,
    pub count: u64,
}

/// Fixed-width histogram of signed offsets; only non-empty bins are listed.
/// Bin `[start, start + width)` with `start` a multiple of the width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width_ns: u64,
    pub bins: Vec<HistogramBin>,
}

impl Histogram {
    pub fn build(offsets: &[i64], bin_width_ns: u64) -> Self {
        let w = bin_width_ns.max(1) as i64;
        let mut counts = BTreeMap::new();
        for &x in offsets {
            *counts.entry(x.div_euclid(w) * w).or_insert(0u64) += 1;
        }
        Histogram {
            bin_width_ns: w as u64,
            bins: counts
                .into_iter()
                .map(|(start_ns, count)| HistogramBin { start_ns, count })
                .collect(),
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("bin_start_ns\tcount\n");
        for b in &self.bins {
            s.push_str(&format!("{}\t{}\n", b.start_ns, b.count));
        }
        s
    }
}

/// Summary of one list of signed offsets in nanoseconds.
///
/// `min`, `max` and `median` are signed; `p80` and `max_abs` are radii over
/// absolute values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetStats {
    pub count: u64,
    pub min: i64,
    pub max: i64,
    pub mean: f64,
    /// Lower median.
    pub median: i64,
    /// Smallest radius containing at least 80% of the offsets.
    pub p80: i64,
    pub max_abs: i64,
    pub histogram: Histogram,
}

pub fn stats(offsets: &[i64]) -> Result<OffsetStats, HarnessError> {
    stats_with_bin(offsets, DEFAULT_BIN_WIDTH_NS)
}

pub fn stats_with_bin(offsets: &[i64], bin_width_ns: u64) -> Result<OffsetStats, HarnessError> {
    if offsets.is_empty() {
        return Err(HarnessError::Empty);
    }
    let n = offsets.len();
    let mut sorted = offsets.to_vec();
    sorted.sort_unstable();
    let mut abs: Vec<i64> = offsets.iter().map(|x| x.abs()).collect();
    abs.sort_unstable();
    let sum: i128 = offsets.iter().map(|&x| x as i128).sum();
    let rank80 = (n * 8).div_ceil(10);
    Ok(OffsetStats {
        count: n as u64,
        min: sorted[0],
        max: sorted[n - 1],
        mean: sum as f64 / n as f64,
        median: sorted[(n - 1) / 2],
        p80: abs[rank80 - 1],
        max_abs: abs[n - 1],
        histogram: Histogram::build(offsets, bin_width_ns),
    })
}
