use serde::{Deserialize, Serialize};

use super::EgressError;
use crate::sim::SimTime;

pub const ALL_GATES_OPEN: u8 = 0xff;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateEntry {
    /// Bit `i` set = traffic class `i` may transmit.
    pub gate_mask: u8,
    pub duration_ns: u64,
}

/// Gate state at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateState {
    pub open_mask: u8,
    /// Time left in the current entry.
    pub time_to_next_change: u64,
    pub entry_index: usize,
    /// Index of the cycle containing the instant, counted from `base_time`.
    pub cycle_index: u64,
}

impl GateState {
    pub fn is_open(&self, class: u8) -> bool {
        self.open_mask & (1 << class) != 0
    }
}

/// Cyclic gate schedule. Entry `i` covers the half-open phase interval
/// `[start_i, start_i + duration_i)` of every cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateControlList {
    base_time: SimTime,
    cycle_time_ns: u64,
    entries: Vec<GateEntry>,
    /// Cumulative end phase of each entry.
    ends: Vec<u64>,
}

impl GateControlList {
    pub fn new(base_time: SimTime, entries: Vec<GateEntry>) -> Result<Self, EgressError> {
        if entries.is_empty() {
            return Err(EgressError::EmptyGcl);
        }
        let mut ends = Vec::with_capacity(entries.len());
        let mut acc = 0u64;
        for (i, e) in entries.iter().enumerate() {
            if e.duration_ns == 0 {
                return Err(EgressError::ZeroDuration(i));
            }
            acc = acc
                .checked_add(e.duration_ns)
                .ok_or(EgressError::CycleOverflow)?;
            ends.push(acc);
        }
        Ok(GateControlList {
            base_time,
            cycle_time_ns: acc,
            entries,
            ends,
        })
    }

    /// Like [`GateControlList::new`] but also checks a declared cycle time.
    pub fn with_cycle_time(
        base_time: SimTime,
        cycle_time_ns: u64,
        entries: Vec<GateEntry>,
    ) -> Result<Self, EgressError> {
        let gcl = Self::new(base_time, entries)?;
        if gcl.cycle_time_ns != cycle_time_ns {
            return Err(EgressError::CycleMismatch {
                sum: gcl.cycle_time_ns,
                cycle: cycle_time_ns,
            });
        }
        Ok(gcl)
    }

    /// Single always-open entry; behaves as a plain strict-priority port.
    pub fn always_open() -> Self {
        Self::new(
            SimTime::ZERO,
            vec![GateEntry {
                gate_mask: ALL_GATES_OPEN,
                duration_ns: 1_000_000_000,
            }],
        )
        .expect("static list is valid")
    }

    pub fn base_time(&self) -> SimTime {
        self.base_time
    }

    pub fn cycle_time_ns(&self) -> u64 {
        self.cycle_time_ns
    }

    pub fn entries(&self) -> &[GateEntry] {
        &self.entries
    }

    /// Start phase of entry `i` within the cycle.
    pub fn entry_start(&self, i: usize) -> u64 {
        if i == 0 {
            0
        } else {
            self.ends[i - 1]
        }
    }

    pub fn state(&self, t: SimTime) -> Result<GateState, EgressError> {
        if t < self.base_time {
            return Err(EgressError::BeforeBaseTime {
                t,
                base: self.base_time,
            });
        }
        let since = t - self.base_time;
        let phase = since % self.cycle_time_ns;
        let idx = self.ends.partition_point(|&end| end <= phase);
        Ok(GateState {
            open_mask: self.entries[idx].gate_mask,
            time_to_next_change: self.ends[idx] - phase,
            entry_index: idx,
            cycle_index: since / self.cycle_time_ns,
        })
    }

    /// Gate of `class` at `t`; closed before the schedule starts.
    pub fn is_open(&self, t: SimTime, class: u8) -> bool {
        self.state(t).is_ok_and(|s| s.is_open(class))
    }

    /// First entry boundary strictly after `t` (the base time if `t` precedes it).
    pub fn next_change(&self, t: SimTime) -> SimTime {
        match self.state(t) {
            Ok(s) => t + s.time_to_next_change,
            Err(_) => self.base_time,
        }
    }

    /// True if `class` is open in every entry.
    pub fn always_open_for(&self, class: u8) -> bool {
        self.entries.iter().all(|e| e.gate_mask & (1 << class) != 0)
    }

    /// How long the gate of `class` stays open from `t` onward: `Some(0)` if
    /// closed at `t`, `None` if it never closes.
    pub fn open_remaining(&self, t: SimTime, class: u8) -> Option<u64> {
        let bit = 1u8 << class;
        let Ok(s) = self.state(t) else {
            return Some(0);
        };
        if s.open_mask & bit == 0 {
            return Some(0);
        }
        if self.always_open_for(class) {
            return None;
        }
        let mut acc = s.time_to_next_change;
        let n = self.entries.len();
        let mut i = (s.entry_index + 1) % n;
        while self.entries[i].gate_mask & bit != 0 {
            acc += self.entries[i].duration_ns;
            i = (i + 1) % n;
        }
        Some(acc)
    }

    /// Longest contiguous open window of `class`, wrapping across cycle
    /// boundaries. `None` if the class is always open.
    pub fn max_window(&self, class: u8) -> Option<u64> {
        if self.always_open_for(class) {
            return None;
        }
        let bit = 1u8 << class;
        let n = self.entries.len();
        // start just after a closed entry so runs never straddle the scan start
        let first_closed = self
            .entries
            .iter()
            .position(|e| e.gate_mask & bit == 0)
            .expect("not always open");
        let (mut best, mut run) = (0u64, 0u64);
        for k in 1..=n {
            let e = &self.entries[(first_closed + k) % n];
            if e.gate_mask & bit != 0 {
                run += e.duration_ns;
                best = best.max(run);
            } else {
                run = 0;
            }
        }
        Some(best)
    }
}
