use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::records::{
    compute_offsets, export_records, import_records, PacketRecord, TimestampKind,
};
use super::stats::{stats_with_bin, OffsetStats};
use super::world::RunResult;
use super::HarnessError;
use crate::redundancy::RecoveryCounters;
use crate::sim::RNG_ALGORITHM;

/// Offset statistics per timestamp kind; `None` when no record carries it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KindStats {
    pub sw_tx: Option<OffsetStats>,
    pub hw_tx: Option<OffsetStats>,
    pub hw_rx: Option<OffsetStats>,
    pub sw_rx: Option<OffsetStats>,
}

impl KindStats {
    pub fn get(&self, kind: TimestampKind) -> Option<&OffsetStats> {
        match kind {
            TimestampKind::SwTx => self.sw_tx.as_ref(),
            TimestampKind::HwTx => self.hw_tx.as_ref(),
            TimestampKind::HwRx => self.hw_rx.as_ref(),
            TimestampKind::SwRx => self.sw_rx.as_ref(),
        }
    }

    fn slot(&mut self, kind: TimestampKind) -> &mut Option<OffsetStats> {
        match kind {
            TimestampKind::SwTx => &mut self.sw_tx,
            TimestampKind::HwTx => &mut self.hw_tx,
            TimestampKind::HwRx => &mut self.hw_rx,
            TimestampKind::SwRx => &mut self.sw_rx,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub scenario: String,
    pub description: String,
    pub seed: u64,
    pub rng: String,
    pub histogram_bin_ns: u64,
    /// Where on the frame hardware timestamps are taken.
    pub hw_timestamp_point: String,
    pub events_executed: u64,
    pub end_time_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamStats {
    pub talker: String,
    pub period_ns: u64,
    pub records: u64,
    pub records_file: String,
    pub stats: KindStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frer: Option<RecoveryCounters>,
}

/// Contents of `stats.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsFile {
    pub metadata: RunMetadata,
    pub streams: Vec<StreamStats>,
    pub drops: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub records: u64,
    pub period_ns: u64,
    pub stats: KindStats,
}

/// Statistics for every timestamp kind, each over the records that carry it.
pub fn summarize(
    records: &[PacketRecord],
    period_ns: u64,
    bin_width_ns: u64,
) -> Result<KindStats, HarnessError> {
    let mut out = KindStats::default();
    for kind in TimestampKind::ALL {
        let present: Vec<PacketRecord> = records
            .iter()
            .filter(|r| r.get(kind).is_some())
            .copied()
            .collect();
        if present.is_empty() {
            continue;
        }
        let offsets = compute_offsets(&present, period_ns, kind)?;
        *out.slot(kind) = Some(stats_with_bin(&offsets, bin_width_ns)?);
    }
    Ok(out)
}

/// Period of the intended-time grid, recovered from the first and last rows.
pub fn infer_period(records: &[PacketRecord]) -> u64 {
    match (records.first(), records.last()) {
        (Some(a), Some(b)) if b.seq > a.seq => {
            (b.intended_tx.0 - a.intended_tx.0) / (b.seq - a.seq)
        }
        _ => 0,
    }
}

/// Recompute statistics from an exported records file.
pub fn report(records_path: &Path, bin_width_ns: u64) -> Result<Report, HarnessError> {
    let records = import_records(records_path)?;
    if records.is_empty() {
        return Err(HarnessError::Empty);
    }
    let period_ns = infer_period(&records);
    Ok(Report {
        records: records.len() as u64,
        period_ns,
        stats: summarize(&records, period_ns, bin_width_ns)?,
    })
}

pub fn write_histograms(stats: &KindStats, dir: &Path, prefix: &str) -> Result<(), HarnessError> {
    for kind in TimestampKind::ALL {
        if let Some(s) = stats.get(kind) {
            fs::write(
                dir.join(format!("histogram_{prefix}{kind}.tsv")),
                s.histogram.to_tsv(),
            )?;
        }
    }
    Ok(())
}

/// Write records CSVs, `stats.json` and histograms for a run into `dir`.
/// The first talker's files carry no name prefix.
pub fn write_outputs(result: &RunResult, dir: &Path) -> Result<StatsFile, HarnessError> {
    fs::create_dir_all(dir)?;
    let mut streams = Vec::new();
    for (i, s) in result.streams.iter().enumerate() {
        let (file, prefix) = if i == 0 {
            ("records.csv".to_string(), String::new())
        } else {
            (
                format!("records_{}.csv", s.talker),
                format!("{}_", s.talker),
            )
        };
        export_records(&s.records, &dir.join(&file))?;
        let stats = summarize(&s.records, s.period_ns, result.histogram_bin_ns)?;
        write_histograms(&stats, dir, &prefix)?;
        streams.push(StreamStats {
            talker: s.talker.clone(),
            period_ns: s.period_ns,
            records: s.records.len() as u64,
            records_file: file,
            stats,
            frer: s.frer,
        });
    }
    let file = StatsFile {
        metadata: RunMetadata {
            scenario: result.scenario.clone(),
            description: result.description.clone(),
            seed: result.seed,
            rng: RNG_ALGORITHM.to_string(),
            histogram_bin_ns: result.histogram_bin_ns,
            hw_timestamp_point: "start of frame".to_string(),
            events_executed: result.events_executed,
            end_time_ns: result.end_time.0,
        },
        streams,
        drops: result.drops.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    fs::write(dir.join("stats.json"), text)?;
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimTime;

    #[test]
    fn subset_per_kind() {
        let recs: Vec<PacketRecord> = (0..4)
            .map(|k| PacketRecord {
                seq: k,
                intended_tx: SimTime(100 * k),
                sw_tx: Some(SimTime(100 * k + 3)),
                hw_rx: (k % 2 == 0).then_some(SimTime(100 * k + 7)),
                ..Default::default()
            })
            .collect();
        assert_eq!(infer_period(&recs), 100);
        let s = summarize(&recs, 100, 1).unwrap();
        assert_eq!(s.sw_tx.as_ref().unwrap().count, 4);
        assert_eq!(s.hw_rx.as_ref().unwrap().count, 2);
        assert_eq!(s.hw_rx.as_ref().unwrap().max, 7);
        assert!(s.hw_tx.is_none());
    }
}
