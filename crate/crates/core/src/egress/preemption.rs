//! MAC merge: express frames interrupting a preemptable transmission.
//!
//! A preemptable frame may be cut at the first multiple of
//! `min_fragment_bytes` past the bytes already on the wire, provided the
//! cut leaves at least `min_fragment_bytes` on each side. The express frame
//! starts at the cut and the remainder resumes right after it; bytes already
//! sent are never retransmitted.

use serde::{Deserialize, Serialize};

use super::EgressError;
use crate::sim::SimTime;
use crate::traffic::transmission_time;

pub const DEFAULT_MIN_FRAGMENT_BYTES: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreemptionConfig {
    #[serde(default)]
    pub enabled: bool,
    /// Bit `i` set = traffic class `i` uses the express MAC; the rest are preemptable.
    #[serde(default)]
    pub express_classes: u8,
    #[serde(default = "default_min_fragment")]
    pub min_fragment_bytes: u32,
}

fn default_min_fragment() -> u32 {
    DEFAULT_MIN_FRAGMENT_BYTES
}

impl Default for PreemptionConfig {
    fn default() -> Self {
        PreemptionConfig {
            enabled: false,
            express_classes: 0,
            min_fragment_bytes: DEFAULT_MIN_FRAGMENT_BYTES,
        }
    }
}

impl PreemptionConfig {
    pub fn express(classes: &[u8]) -> Self {
        PreemptionConfig {
            enabled: true,
            express_classes: classes.iter().fold(0, |m, c| m | (1 << c)),
            min_fragment_bytes: DEFAULT_MIN_FRAGMENT_BYTES,
        }
    }

    pub fn is_express(&self, class: u8) -> bool {
        self.enabled && self.express_classes & (1 << class) != 0
    }

    pub fn preemptable_classes(&self) -> u8 {
        !self.express_classes
    }
}

/// Current segment of a preemptable frame on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreemptableTx {
    pub size_bytes: u32,
    pub class: u8,
    /// Bytes already sent when this segment started.
    pub bytes_done: u32,
    pub segment_start: SimTime,
    pub link_rate_bps: u64,
    /// Per-frame overhead, sent after the last byte.
    pub overhead_bytes: u64,
}

impl PreemptableTx {
    fn byte_time(&self, bytes: u32) -> u64 {
        transmission_time(bytes as u64, self.link_rate_bps, 0).expect("positive rate")
    }

    fn tail_time(&self) -> u64 {
        transmission_time(
            self.size_bytes as u64,
            self.link_rate_bps,
            self.overhead_bytes,
        )
        .expect("positive rate")
            - self.byte_time(self.size_bytes)
    }

    /// True instant at which byte count `bytes` is reached in this segment.
    pub fn time_at_byte(&self, bytes: u32) -> SimTime {
        self.segment_start + (self.byte_time(bytes) - self.byte_time(self.bytes_done))
    }

    /// Completion of the frame if nothing interrupts it.
    pub fn end(&self) -> SimTime {
        self.time_at_byte(self.size_bytes) + self.tail_time()
    }

    /// Whole bytes fully on the wire at `t`.
    pub fn bytes_on_wire(&self, t: SimTime) -> u32 {
        if t <= self.segment_start {
            return self.bytes_done;
        }
        let elapsed = (t - self.segment_start) + self.byte_time(self.bytes_done);
        let approx = (elapsed as u128 * self.link_rate_bps as u128 / 8_000_000_000) as u32;
        let mut b = approx.clamp(self.bytes_done, self.size_bytes);
        while b < self.size_bytes && self.byte_time(b + 1) <= elapsed {
            b += 1;
        }
        while b > self.bytes_done && self.byte_time(b) > elapsed {
            b -= 1;
        }
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreemptPoint {
    pub at: SimTime,
    /// Bytes of the preemptable frame sent before the cut.
    pub bytes_sent: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResumePlan {
    /// `None` if the express frame has to wait for the end of the frame.
    pub preempt: Option<PreemptPoint>,
    pub express_start: SimTime,
    pub express_end: SimTime,
    pub resume_at: Option<SimTime>,
    pub pframe_end: SimTime,
}

/// Plan the arrival of an express frame of `express_bytes` at `t` while
/// `ongoing` is on the wire.
pub fn preempt_transmit(
    cfg: &PreemptionConfig,
    ongoing: &PreemptableTx,
    express_bytes: u32,
    t: SimTime,
) -> Result<ResumePlan, EgressError> {
    if !cfg.enabled || cfg.is_express(ongoing.class) {
        return Err(EgressError::NotPreemptable);
    }
    let express_time = transmission_time(
        express_bytes as u64,
        ongoing.link_rate_bps,
        ongoing.overhead_bytes,
    )
    .expect("positive rate");
    let frag = cfg.min_fragment_bytes.max(1);
    let sent = ongoing.bytes_on_wire(t);
    let point = (sent / frag + 1) * frag;
    let cut_ok = point >= frag && point < ongoing.size_bytes && ongoing.size_bytes - point >= frag;

    if !cut_ok {
        let end = ongoing.end().max(t);
        return Ok(ResumePlan {
            preempt: None,
            express_start: end,
            express_end: end + express_time,
            resume_at: None,
            pframe_end: ongoing.end(),
        });
    }

    let at = ongoing.time_at_byte(point);
    let express_end = at + express_time;
    let remainder = PreemptableTx {
        bytes_done: point,
        segment_start: express_end,
        ..*ongoing
    };
    Ok(ResumePlan {
        preempt: Some(PreemptPoint {
            at,
            bytes_sent: point,
        }),
        express_start: at,
        express_end,
        resume_at: Some(express_end),
        pframe_end: remainder.end(),
    })
}
