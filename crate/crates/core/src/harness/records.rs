use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::sim::SimTime;

pub const CSV_HEADER: &str = "seq,intended_tx_ns,sw_tx_ns,hw_tx_ns,hw_rx_ns,sw_rx_ns";

/// Clock readings for one packet: system clock for the software stamps,
/// the NIC clock of the respective end station for the hardware stamps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub seq: u64,
    pub intended_tx: SimTime,
    pub sw_tx: Option<SimTime>,
    pub hw_tx: Option<SimTime>,
    pub hw_rx: Option<SimTime>,
    pub sw_rx: Option<SimTime>,
}

impl PacketRecord {
    pub fn new(seq: u64, intended_tx: SimTime) -> Self {
        PacketRecord {
            seq,
            intended_tx,
            ..Default::default()
        }
    }

    pub fn get(&self, kind: TimestampKind) -> Option<SimTime> {
        match kind {
            TimestampKind::SwTx => self.sw_tx,
            TimestampKind::HwTx => self.hw_tx,
            TimestampKind::HwRx => self.hw_rx,
            TimestampKind::SwRx => self.sw_rx,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampKind {
    SwTx,
    HwTx,
    HwRx,
    SwRx,
}

impl TimestampKind {
    pub const ALL: [TimestampKind; 4] = [
        TimestampKind::SwTx,
        TimestampKind::HwTx,
        TimestampKind::HwRx,
        TimestampKind::SwRx,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TimestampKind::SwTx => "sw_tx",
            TimestampKind::HwTx => "hw_tx",
            TimestampKind::HwRx => "hw_rx",
            TimestampKind::SwRx => "sw_rx",
        }
    }
}

impl fmt::Display for TimestampKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Signed deviation of each reading from the intended grid
/// `base + seq * period`, where `base` is the intended time of seq 0.
pub fn compute_offsets(
    records: &[PacketRecord],
    period_ns: u64,
    kind: TimestampKind,
) -> Result<Vec<i64>, HarnessError> {
    let first = records.first().ok_or(HarnessError::Empty)?;
    let base = first.intended_tx.0 as i128 - first.seq as i128 * period_ns as i128;
    records
        .iter()
        .map(|r| {
            let reading = r
                .get(kind)
                .ok_or(HarnessError::MissingTimestamp { seq: r.seq, kind })?;
            let intended = base + r.seq as i128 * period_ns as i128;
            Ok((reading.0 as i128 - intended) as i64)
        })
        .collect()
}

fn cell(t: Option<SimTime>) -> String {
    t.map(|t| t.0.to_string()).unwrap_or_default()
}

pub fn export_records(records: &[PacketRecord], path: &Path) -> Result<(), HarnessError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.seq,
            r.intended_tx.0,
            cell(r.sw_tx),
            cell(r.hw_tx),
            cell(r.hw_rx),
            cell(r.sw_rx)
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn import_records(path: &Path) -> Result<Vec<PacketRecord>, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i as u64 + 1;
        let row = row.map_err(|e| HarnessError::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        if i == 0 {
            let header = row.iter().collect::<Vec<_>>().join(",");
            if header != CSV_HEADER {
                return Err(HarnessError::MalformedRow {
                    line,
                    reason: format!("expected header `{CSV_HEADER}`"),
                });
            }
            continue;
        }
        out.push(parse_row(&row, line)?);
    }
    Ok(out)
}

fn parse_row(row: &csv::StringRecord, line: u64) -> Result<PacketRecord, HarnessError> {
    let bad = |reason: String| HarnessError::MalformedRow { line, reason };
    if row.len() != 6 {
        return Err(bad(format!("expected 6 fields, found {}", row.len())));
    }
    let num = |i: usize| -> Result<u64, HarnessError> {
        row[i]
            .trim()
            .parse()
            .map_err(|_| bad(format!("field {} is not an integer: {:?}", i + 1, &row[i])))
    };
    let opt = |i: usize| -> Result<Option<SimTime>, HarnessError> {
        if row[i].trim().is_empty() {
            Ok(None)
        } else {
            num(i).map(|v| Some(SimTime(v)))
        }
    };
    Ok(PacketRecord {
        seq: num(0)?,
        intended_tx: SimTime(num(1)?),
        sw_tx: opt(2)?,
        hw_tx: opt(3)?,
        hw_rx: opt(4)?,
        sw_rx: opt(5)?,
    })
}
