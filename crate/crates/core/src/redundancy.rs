//! Frame replication and elimination: sequence numbering, replication onto
//! member paths, and windowed duplicate elimination.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::traffic::{Frame, StreamHandle};

pub const DEFAULT_RECOVERY_WINDOW: u16 = 64;
/// Largest window for which "newer" stays unambiguous under mod-65536 arithmetic.
pub const MAX_RECOVERY_WINDOW: u16 = 32_768;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrerError {
    #[error("replication needs at least one member path")]
    NoPaths,
    #[error("frame {0} carries no sequence number")]
    MissingSeq(u64),
    #[error("recovery window must be in 1..=32768, got {0}")]
    BadWindow(u32),
}

#[derive(Debug, Clone)]
pub struct SequenceGenerator {
    pub stream: StreamHandle,
    next_seq: u16,
}

impl SequenceGenerator {
    pub fn new(stream: StreamHandle) -> Self {
        Self::starting_at(stream, 0)
    }

    pub fn starting_at(stream: StreamHandle, first: u16) -> Self {
        SequenceGenerator {
            stream,
            next_seq: first,
        }
    }

    pub fn next_seq(&mut self) -> u16 {
        let s = self.next_seq;
        self.next_seq = self.next_seq.wrapping_add(1);
        s
    }

    pub fn stamp(&mut self, frame: &mut Frame) {
        frame.seq = Some(self.next_seq());
    }
}

/// One copy per member path; copies differ only in their routing label.
pub fn replicate(frame: &Frame, member_paths: &[u8]) -> Result<Vec<Frame>, FrerError> {
    if member_paths.is_empty() {
        return Err(FrerError::NoPaths);
    }
    Ok(member_paths
        .iter()
        .map(|&label| {
            let mut f = frame.clone();
            f.path_label = label;
            f
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryOutcome {
    Accept,
    DiscardDuplicate,
    DiscardStale,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryCounters {
    pub accepted: u64,
    pub duplicates: u64,
    pub stale: u64,
}

/// Sliding acceptance window over the last `window_size` sequence numbers
/// up to the highest accepted one.
#[derive(Debug, Clone)]
pub struct RecoveryState {
    pub stream: StreamHandle,
    window_size: u16,
    /// Highest accepted sequence number, unwrapped to a monotone counter.
    highest: Option<u64>,
    seen: Vec<bool>,
    pub counters: RecoveryCounters,
}

impl RecoveryState {
    pub fn new(stream: StreamHandle, window_size: u16) -> Result<Self, FrerError> {
        if window_size == 0 || window_size > MAX_RECOVERY_WINDOW {
            return Err(FrerError::BadWindow(window_size as u32));
        }
        Ok(RecoveryState {
            stream,
            window_size,
            highest: None,
            seen: vec![false; window_size as usize],
            counters: RecoveryCounters::default(),
        })
    }

    pub fn window_size(&self) -> u16 {
        self.window_size
    }

    pub fn highest_seq(&self) -> Option<u16> {
        self.highest.map(|h| h as u16)
    }

    fn slot(&self, ext: u64) -> usize {
        (ext % self.window_size as u64) as usize
    }

    pub fn recover_seq(&mut self, seq: u16) -> RecoveryOutcome {
        let outcome = self.classify(seq);
        match outcome {
            RecoveryOutcome::Accept => self.counters.accepted += 1,
            RecoveryOutcome::DiscardDuplicate => self.counters.duplicates += 1,
            RecoveryOutcome::DiscardStale => self.counters.stale += 1,
        }
        outcome
    }

    fn classify(&mut self, seq: u16) -> RecoveryOutcome {
        let w = self.window_size as u64;
        let Some(high) = self.highest else {
            // start well above zero so backward distances never underflow
            let ext = (1u64 << 32) + seq as u64;
            self.highest = Some(ext);
            let slot = self.slot(ext);
            self.seen[slot] = true;
            return RecoveryOutcome::Accept;
        };
        let ahead = seq.wrapping_sub(high as u16);
        if ahead == 0 {
            return RecoveryOutcome::DiscardDuplicate;
        }
        if ahead < 0x8000 {
            let ext = high + ahead as u64;
            if ahead as u64 >= w {
                self.seen.fill(false);
            } else {
                for e in high + 1..=ext {
                    let slot = self.slot(e);
                    self.seen[slot] = false;
                }
            }
            let slot = self.slot(ext);
            self.seen[slot] = true;
            self.highest = Some(ext);
            return RecoveryOutcome::Accept;
        }
        let behind = (high as u16).wrapping_sub(seq) as u64;
        if behind >= w {
            return RecoveryOutcome::DiscardStale;
        }
        let slot = self.slot(high - behind);
        if self.seen[slot] {
            RecoveryOutcome::DiscardDuplicate
        } else {
            self.seen[slot] = true;
            RecoveryOutcome::Accept
        }
    }

    pub fn recover(&mut self, frame: &Frame) -> Result<RecoveryOutcome, FrerError> {
        let seq = frame.seq.ok_or(FrerError::MissingSeq(frame.id))?;
        Ok(self.recover_seq(seq))
    }
}
