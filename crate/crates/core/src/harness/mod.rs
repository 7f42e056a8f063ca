//! Scenario execution and isochron-style measurement: a cyclic talker,
//! four timestamps per packet, offset statistics and file outputs.

mod config;
mod records;
mod report;
mod stats;
mod sweep;
mod world;

pub use config::{
    set_dotted, CqfScenarioConfig, EtfShaperConfig, FilterConfig, FrerStreamConfig, GateConfig,
    LinkConfig, NodeClocks, NodeConfig, NodeKind, RunConfig, ScenarioConfig, ShaperConfig,
    StreamRuleConfig, TalkerConfig, TalkerMode, TaprioConfig,
};
pub use records::{
    compute_offsets, export_records, import_records, PacketRecord, TimestampKind, CSV_HEADER,
};
pub use report::{
    infer_period, report, summarize, write_histograms, write_outputs, KindStats, Report,
    RunMetadata, StatsFile, StreamStats,
};
pub use stats::{
    stats, stats_with_bin, Histogram, HistogramBin, OffsetStats, DEFAULT_BIN_WIDTH_NS,
};
pub use sweep::{sweep, SweepRun};
pub use world::{
    run_scenario, run_scenario_with, EnqueueEntry, PortInfo, RunOptions, RunResult, RxEntry,
    StreamRun, TxSegment,
};

use std::fmt;

use thiserror::Error;

/// One problem found while validating a scenario, keyed by its field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn join_diagnostics(d: &[Diagnostic]) -> String {
    d.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {}", join_diagnostics(.0))]
    ConfigInvalid(Vec<Diagnostic>),
    #[error("record {seq} has no {kind} timestamp")]
    MissingTimestamp { seq: u64, kind: TimestampKind },
    #[error("no offsets to summarize")]
    Empty,
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("simulation failed: {0}")]
    Runtime(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn is_config(&self) -> bool {
        matches!(self, HarnessError::ConfigInvalid(_))
    }

    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        HarnessError::ConfigInvalid(vec![Diagnostic::new(field, message)])
    }
}
