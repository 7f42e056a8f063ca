//! Cyclic queuing and forwarding built from an always-open ingress stream
//! gate that alternates the assigned IPV every cycle, and an egress gate
//! list with the same cycle that drains the class collected in the
//! previous cycle.

use serde::{Deserialize, Serialize};

use super::NetworkError;
use crate::egress::{GateEntry, ALL_GATES_OPEN};
use crate::ingress::StreamGateEntry;
use crate::sim::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CqfConfig {
    pub cycle_time_ns: u64,
    pub ipv_even: u8,
    pub ipv_odd: u8,
    pub hops: u32,
    pub base_time: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CqfSchedule {
    pub base_time: SimTime,
    pub ingress: Vec<StreamGateEntry>,
    pub egress: Vec<GateEntry>,
}

pub fn cqf_compose(cfg: &CqfConfig) -> Result<CqfSchedule, NetworkError> {
    if cfg.cycle_time_ns == 0 {
        return Err(NetworkError::InvalidCqf(
            "cycle time must be positive".into(),
        ));
    }
    if cfg.ipv_even == cfg.ipv_odd || cfg.ipv_even > 7 || cfg.ipv_odd > 7 {
        return Err(NetworkError::InvalidCqf(
            "ipv_even and ipv_odd must be distinct classes 0-7".into(),
        ));
    }
    let collect = |ipv: u8| StreamGateEntry {
        open: true,
        duration_ns: cfg.cycle_time_ns,
        ipv: Some(ipv),
        max_octets: None,
    };
    // each cycle keeps the class being collected closed and drains the other
    let drain_all_but = |closed: u8| GateEntry {
        gate_mask: ALL_GATES_OPEN & !(1 << closed),
        duration_ns: cfg.cycle_time_ns,
    };
    Ok(CqfSchedule {
        base_time: cfg.base_time,
        ingress: vec![collect(cfg.ipv_even), collect(cfg.ipv_odd)],
        egress: vec![drain_all_but(cfg.ipv_even), drain_all_but(cfg.ipv_odd)],
    })
}

/// Worst-case talker-to-listener delay across `hops` CQF bridges.
pub fn cqf_latency_bound(hops: u32, cycle_time_ns: u64) -> Result<u64, NetworkError> {
    if hops == 0 {
        return Err(NetworkError::ZeroHops);
    }
    Ok((hops as u64 + 1) * cycle_time_ns)
}
