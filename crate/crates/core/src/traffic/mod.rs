//! Frames, stream keys and identification, wire-time arithmetic.

mod frame;
mod stream;

pub use frame::{
    transmission_time, Frame, FrameLimits, MacAddr, StreamKey, Timeline, TimestampTrace,
    DEFAULT_MAX_FRAME_BYTES, DEFAULT_MIN_FRAME_BYTES,
};
pub use stream::{make_stream_rules, StreamHandle, StreamPattern, StreamRules};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrafficError {
    #[error("link rate must be positive")]
    ZeroRate,
    #[error("rule {0} duplicates an earlier exact rule")]
    DuplicateExactRule(usize),
    #[error("frame size {size} outside [{min}, {max}]")]
    FrameSize { size: u32, min: u32, max: u32 },
    #[error("malformed MAC address {0:?}")]
    BadMac(String),
}
