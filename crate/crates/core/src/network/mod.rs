//! Links, bridges and the CQF composer.

mod bridge;
mod cqf;

pub use bridge::{BridgeNode, ForwardOutcome, ForwardingPreset, ForwardingTable};
pub use cqf::{cqf_compose, cqf_latency_bound, CqfConfig, CqfSchedule};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::traffic::MacAddr;

/// Global index of a port in a compiled topology.
pub type PortId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("bridge {bridge} has no route to {dest} (label {label})")]
    UnknownEgress {
        bridge: String,
        dest: MacAddr,
        label: u8,
    },
    #[error("hop count must be at least 1")]
    ZeroHops,
    #[error("invalid CQF configuration: {0}")]
    InvalidCqf(String),
}

/// Full-duplex point-to-point link; both directions share these parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub rate_bps: u64,
    pub propagation_ns: u64,
    /// Per-frame wire overhead (preamble, IFG), off by default.
    pub overhead_bytes: u64,
    /// Independent per-frame loss probability.
    pub loss: f64,
}

impl Link {
    pub fn new(rate_bps: u64) -> Self {
        Link {
            rate_bps,
            propagation_ns: 0,
            overhead_bytes: 0,
            loss: 0.0,
        }
    }
}
