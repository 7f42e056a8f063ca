use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::gcl::GateControlList;
use crate::sim::SimTime;
use crate::traffic::{transmission_time, Frame};

pub const NUM_CLASSES: usize = 8;
pub const DEFAULT_QUEUE_CAPACITY: usize = 64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardMode {
    /// A frame starts only if it finishes before its gate closes.
    #[default]
    Fit,
    /// A frame may start whenever its gate is open and overrun the window.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Queued,
    DroppedFull,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selected {
    pub frame: Frame,
    pub tx_start: SimTime,
}

#[derive(Debug, Clone)]
struct Queued {
    frame: Frame,
    enqueued_at: SimTime,
}

/// Per-class FIFOs behind a gate control list.
#[derive(Debug, Clone)]
pub struct TaprioPort {
    gcl: GateControlList,
    queues: [VecDeque<Queued>; NUM_CLASSES],
    capacity: usize,
    guard_mode: GuardMode,
    link_rate_bps: u64,
    overhead_bytes: u64,
    oversize_drops: Vec<Frame>,
}

impl TaprioPort {
    pub fn new(
        gcl: GateControlList,
        capacity: usize,
        guard_mode: GuardMode,
        link_rate_bps: u64,
        overhead_bytes: u64,
    ) -> Self {
        TaprioPort {
            gcl,
            queues: Default::default(),
            capacity,
            guard_mode,
            link_rate_bps,
            overhead_bytes,
            oversize_drops: Vec::new(),
        }
    }

    pub fn gcl(&self) -> &GateControlList {
        &self.gcl
    }

    pub fn guard_mode(&self) -> GuardMode {
        self.guard_mode
    }

    pub fn queue_len(&self, class: u8) -> usize {
        self.queues[class as usize].len()
    }

    pub fn total_queued(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    fn wire_time(&self, frame: &Frame) -> u64 {
        transmission_time(
            frame.size_bytes as u64,
            self.link_rate_bps,
            self.overhead_bytes,
        )
        .expect("port rate validated at construction")
    }

    /// Append to the frame's traffic-class FIFO; a full queue drops the arrival.
    pub fn enqueue(&mut self, frame: Frame, t: SimTime) -> EnqueueOutcome {
        let q = &mut self.queues[frame.traffic_class as usize & 7];
        if q.len() >= self.capacity {
            return EnqueueOutcome::DroppedFull;
        }
        q.push_back(Queued {
            frame,
            enqueued_at: t,
        });
        EnqueueOutcome::Queued
    }

    fn fits(&self, frame: &Frame, t: SimTime, class: u8) -> bool {
        match self.gcl.open_remaining(t, class) {
            Some(0) => false,
            None => true,
            Some(left) => match self.guard_mode {
                GuardMode::None => true,
                GuardMode::Fit => self.wire_time(frame) <= left,
            },
        }
    }

    /// Drop head-of-line frames that can never fit any window of their class
    /// once they have waited a full cycle.
    fn expire_oversize(&mut self, t: SimTime, class: u8) {
        if self.guard_mode == GuardMode::None {
            return;
        }
        let Some(window) = self.gcl.max_window(class) else {
            return;
        };
        let cycle = self.gcl.cycle_time_ns();
        while let Some(head) = self.queues[class as usize].front() {
            let too_big = self.wire_time(&head.frame) > window;
            if too_big && t.saturating_sub(head.enqueued_at) >= cycle {
                let q = self.queues[class as usize]
                    .pop_front()
                    .expect("head exists");
                self.oversize_drops.push(q.frame);
            } else {
                break;
            }
        }
    }

    /// Apply the oversize rule to every class.
    pub fn expire(&mut self, t: SimTime) {
        for class in 0..NUM_CLASSES as u8 {
            self.expire_oversize(t, class);
        }
    }

    /// Highest class among `class_mask` whose head frame may start at `t`.
    pub fn peek_eligible(&mut self, t: SimTime, class_mask: u8) -> Option<(u8, &Frame)> {
        let mut found = None;
        for class in (0..NUM_CLASSES as u8).rev() {
            if class_mask & (1 << class) == 0 {
                continue;
            }
            self.expire_oversize(t, class);
            if let Some(head) = self.queues[class as usize].front() {
                if self.fits(&head.frame, t, class) {
                    found = Some(class);
                    break;
                }
            }
        }
        let class = found?;
        Some((class, &self.queues[class as usize].front()?.frame))
    }

    pub fn pop_class(&mut self, class: u8) -> Option<Frame> {
        self.queues[class as usize].pop_front().map(|q| q.frame)
    }

    /// Strict-priority selection over open, fitting classes; higher class wins.
    pub fn select(&mut self, t: SimTime) -> Option<Selected> {
        self.select_masked(t, 0xff)
    }

    pub fn select_masked(&mut self, t: SimTime, class_mask: u8) -> Option<Selected> {
        let (class, _) = self.peek_eligible(t, class_mask)?;
        let frame = self.pop_class(class)?;
        Some(Selected { frame, tx_start: t })
    }

    pub fn next_gate_change(&self, t: SimTime) -> SimTime {
        self.gcl.next_change(t)
    }

    /// Earliest instant at which a queue head that can never fit its
    /// window becomes due for dropping.
    pub fn next_expiry(&self) -> Option<SimTime> {
        if self.guard_mode == GuardMode::None {
            return None;
        }
        let cycle = self.gcl.cycle_time_ns();
        (0..NUM_CLASSES as u8)
            .filter_map(|class| {
                let window = self.gcl.max_window(class)?;
                let head = self.queues[class as usize].front()?;
                (self.wire_time(&head.frame) > window).then(|| head.enqueued_at + cycle)
            })
            .min()
    }

    pub fn take_oversize_drops(&mut self) -> Vec<Frame> {
        std::mem::take(&mut self.oversize_drops)
    }
}
