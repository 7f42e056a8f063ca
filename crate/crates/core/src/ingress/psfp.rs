use serde::{Deserialize, Serialize};

use crate::egress::{EgressError, GateControlList, GateEntry};
use crate::sim::SimTime;
use crate::traffic::Frame;

/// One entry of a stream gate schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamGateEntry {
    pub open: bool,
    pub duration_ns: u64,
    /// IPV assigned to frames passing during this entry.
    #[serde(default)]
    pub ipv: Option<u8>,
    /// Octet budget for each occurrence of this entry.
    #[serde(default)]
    pub max_octets: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsfpDecision {
    Pass(Option<u8>),
    DropClosedGate,
    DropOctetBudget,
    DropNoStream,
}

impl PsfpDecision {
    pub fn passed(&self) -> bool {
        matches!(self, PsfpDecision::Pass(_))
    }
}

/// Identifies one occurrence of one schedule entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WindowId {
    pub cycle: u64,
    pub entry: usize,
}

/// A per-stream ingress gate. The schedule reuses [`GateControlList`] with
/// bit 0 standing for this gate.
#[derive(Debug, Clone)]
pub struct StreamGate {
    gcl: GateControlList,
    ipv: Vec<Option<u8>>,
    max_octets: Vec<Option<u64>>,
    running_octets: u64,
    window: Option<WindowId>,
}

impl StreamGate {
    pub fn new(base_time: SimTime, entries: &[StreamGateEntry]) -> Result<Self, EgressError> {
        let gcl = GateControlList::new(
            base_time,
            entries
                .iter()
                .map(|e| GateEntry {
                    gate_mask: e.open as u8,
                    duration_ns: e.duration_ns,
                })
                .collect(),
        )?;
        Ok(StreamGate {
            gcl,
            ipv: entries.iter().map(|e| e.ipv).collect(),
            max_octets: entries.iter().map(|e| e.max_octets).collect(),
            running_octets: 0,
            window: None,
        })
    }

    pub fn always_open() -> Self {
        Self::new(
            SimTime::ZERO,
            &[StreamGateEntry {
                open: true,
                duration_ns: 1_000_000_000,
                ipv: None,
                max_octets: None,
            }],
        )
        .expect("static schedule is valid")
    }

    pub fn gcl(&self) -> &GateControlList {
        &self.gcl
    }

    pub fn running_octets(&self) -> u64 {
        self.running_octets
    }

    /// Window containing `t`, or `None` before the schedule starts.
    pub fn window_at(&self, t: SimTime) -> Option<WindowId> {
        let s = self.gcl.state(t).ok()?;
        Some(WindowId {
            cycle: s.cycle_index,
            entry: s.entry_index,
        })
    }

    pub fn entry_max_octets(&self, entry: usize) -> Option<u64> {
        self.max_octets[entry]
    }

    /// Decide for `frame` received (last bit) at `t`. On pass the frame's IPV
    /// is set when the window assigns one; bytes are never touched.
    pub fn process(&mut self, frame: &mut Frame, t: SimTime) -> PsfpDecision {
        let Ok(state) = self.gcl.state(t) else {
            return PsfpDecision::DropClosedGate;
        };
        let here = WindowId {
            cycle: state.cycle_index,
            entry: state.entry_index,
        };
        if self.window != Some(here) {
            self.window = Some(here);
            self.running_octets = 0;
        }
        if !state.is_open(0) {
            return PsfpDecision::DropClosedGate;
        }
        let size = frame.size_bytes as u64;
        if let Some(budget) = self.max_octets[here.entry] {
            if self.running_octets + size > budget {
                return PsfpDecision::DropOctetBudget;
            }
        }
        self.running_octets += size;
        let ipv = self.ipv[here.entry];
        if let Some(v) = ipv {
            assign_ipv(frame, v);
        }
        PsfpDecision::Pass(ipv)
    }
}

pub fn psfp_process(gate: &mut StreamGate, frame: &mut Frame, t: SimTime) -> PsfpDecision {
    gate.process(frame, t)
}

/// Set the internal priority value. Only metadata changes.
pub fn assign_ipv(frame: &mut Frame, ipv: u8) {
    debug_assert!(ipv < 8);
    frame.ipv = Some(ipv & 7);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(open: bool, d: u64, ipv: Option<u8>, max: Option<u64>) -> StreamGateEntry {
        StreamGateEntry {
            open,
            duration_ns: d,
            ipv,
            max_octets: max,
        }
    }

    #[test]
    fn always_open_passes() {
        let mut g = StreamGate::always_open();
        let mut f = Frame::new(1, 64, 0);
        assert_eq!(g.process(&mut f, SimTime(5)), PsfpDecision::Pass(None));
        assert_eq!(f.ipv, None);
    }

    #[test]
    fn budget_per_window() {
        let mut g = StreamGate::new(
            SimTime(0),
            &[
                entry(true, 1_000, None, Some(2_000)),
                entry(false, 1_000, None, None),
            ],
        )
        .unwrap();
        let mut out = Vec::new();
        for t in [10, 20, 30] {
            let mut f = Frame::new(t, 1_000, 0);
            out.push(g.process(&mut f, SimTime(t)));
        }
        assert_eq!(
            out,
            vec![
                PsfpDecision::Pass(None),
                PsfpDecision::Pass(None),
                PsfpDecision::DropOctetBudget
            ]
        );
        // next occurrence of the window starts fresh
        let mut f = Frame::new(9, 1_000, 0);
        assert_eq!(g.process(&mut f, SimTime(2_010)), PsfpDecision::Pass(None));
    }

    #[test]
    fn oversize_drop_does_not_consume() {
        let mut g = StreamGate::new(SimTime(0), &[entry(true, 1_000, None, Some(1_500))]).unwrap();
        let mut big = Frame::new(1, 1_000, 0);
        let mut small = Frame::new(2, 400, 0);
        assert!(g.process(&mut big, SimTime(1)).passed());
        let mut big2 = Frame::new(3, 1_000, 0);
        assert_eq!(
            g.process(&mut big2, SimTime(2)),
            PsfpDecision::DropOctetBudget
        );
        assert_eq!(g.running_octets(), 1_000);
        assert!(g.process(&mut small, SimTime(3)).passed());
    }

    #[test]
    fn closed_window_drops() {
        let mut g = StreamGate::new(
            SimTime(0),
            &[entry(true, 100, None, None), entry(false, 100, None, None)],
        )
        .unwrap();
        let mut f = Frame::new(1, 64, 0);
        assert_eq!(
            g.process(&mut f, SimTime(150)),
            PsfpDecision::DropClosedGate
        );
        // boundary instant belongs to the window that starts there
        assert_eq!(
            g.process(&mut f, SimTime(100)),
            PsfpDecision::DropClosedGate
        );
        assert!(g.process(&mut f, SimTime(200)).passed());
    }

    #[test]
    fn ipv_assigned_without_touching_bytes() {
        let mut g = StreamGate::new(SimTime(0), &[entry(true, 100, Some(3), None)]).unwrap();
        let mut f = Frame::new(1, 256, 0);
        let before = f.wire_image();
        assert_eq!(g.process(&mut f, SimTime(1)), PsfpDecision::Pass(Some(3)));
        assert_eq!(f.ipv, Some(3));
        assert_eq!(f.egress_class(), 3);
        assert_eq!(f.wire_image(), before);
        assert_eq!(f.priority, 0);
    }

    #[test]
    fn last_ipv_assignment_wins() {
        let mut f = Frame::new(1, 64, 0);
        assign_ipv(&mut f, 2);
        assign_ipv(&mut f, 6);
        assert_eq!(f.egress_class(), 6);
    }
}
