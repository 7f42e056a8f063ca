use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::TrafficError;
use crate::sim::SimTime;

pub const DEFAULT_MIN_FRAME_BYTES: u32 = 64;
pub const DEFAULT_MAX_FRAME_BYTES: u32 = 9_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MacAddr(pub [u8; 6]);

impl MacAddr {
    /// Locally administered unicast address derived from an index.
    pub fn local(index: u32) -> Self {
        let b = index.to_be_bytes();
        MacAddr([0x02, 0x00, b[0], b[1], b[2], b[3]])
    }
}

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d, e, g] = self.0;
        write!(f, "{a:02x}:{b:02x}:{c:02x}:{d:02x}:{e:02x}:{g:02x}")
    }
}

impl FromStr for MacAddr {
    type Err = TrafficError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TrafficError::BadMac(s.to_string());
        let mut out = [0u8; 6];
        let mut parts = s.split(':');
        for byte in out.iter_mut() {
            let p = parts.next().ok_or_else(bad)?;
            if p.len() != 2 {
                return Err(bad());
            }
            *byte = u8::from_str_radix(p, 16).map_err(|_| bad())?;
        }
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(MacAddr(out))
    }
}

impl Serialize for MacAddr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MacAddr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Header fields used for stream identification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub dest_mac: MacAddr,
    pub vlan_id: u16,
    pub pcp: u8,
}

/// The four measurement timestamps, as clock readings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimestampTrace {
    pub intended_tx: SimTime,
    pub sw_tx: Option<SimTime>,
    pub hw_tx: Option<SimTime>,
    pub hw_rx: Option<SimTime>,
    pub sw_rx: Option<SimTime>,
}

/// True-time instants of the pipeline stages a frame went through.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Timeline {
    pub wake: Option<SimTime>,
    pub sw_tx: Option<SimTime>,
    pub hw_tx: Option<SimTime>,
    /// First bit at the final receiver.
    pub hw_rx: Option<SimTime>,
    /// Last bit at the final receiver.
    pub rx_end: Option<SimTime>,
    pub sw_rx: Option<SimTime>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: u64,
    pub size_bytes: u32,
    pub priority: u8,
    pub traffic_class: u8,
    pub stream: Option<StreamKey>,
    /// Redundancy sequence number.
    pub seq: Option<u16>,
    /// Internal priority value. Metadata only; never changes the frame bytes.
    pub ipv: Option<u8>,
    /// Launch time, in the sending node's clock domain.
    pub txtime: Option<SimTime>,
    pub trace: TimestampTrace,
    pub timeline: Timeline,
    /// Index of the talker that generated the frame.
    pub talker: usize,
    /// Application-level packet number within its talker.
    pub app_seq: u64,
    /// Routing label; replicas of one packet carry distinct labels.
    pub path_label: u8,
}

impl Frame {
    pub fn new(id: u64, size_bytes: u32, priority: u8) -> Self {
        Frame {
            id,
            size_bytes,
            priority,
            traffic_class: priority,
            stream: None,
            seq: None,
            ipv: None,
            txtime: None,
            trace: TimestampTrace::default(),
            timeline: Timeline::default(),
            talker: 0,
            app_seq: 0,
            path_label: 0,
        }
    }

    pub fn with_stream(mut self, key: StreamKey) -> Self {
        self.stream = Some(key);
        self
    }

    /// Traffic class used for egress queuing: the IPV when assigned, else the priority.
    pub fn egress_class(&self) -> u8 {
        self.ipv.unwrap_or(self.priority)
    }

    /// Synthetic on-wire image: destination, 802.1Q tag, zero payload up to
    /// `size_bytes`. IPV and other metadata do not appear in it.
    pub fn wire_image(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.size_bytes as usize);
        if let Some(k) = &self.stream {
            out.extend_from_slice(&k.dest_mac.0);
            out.extend_from_slice(&[0u8; 6]);
            out.extend_from_slice(&0x8100u16.to_be_bytes());
            let tci = ((k.pcp as u16) << 13) | (k.vlan_id & 0x0fff);
            out.extend_from_slice(&tci.to_be_bytes());
        }
        if let Some(seq) = self.seq {
            out.extend_from_slice(&seq.to_be_bytes());
        }
        out.resize(self.size_bytes.max(out.len() as u32) as usize, 0);
        out
    }
}

/// Accepted frame-size range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameLimits {
    pub min_bytes: u32,
    pub max_bytes: u32,
}

impl Default for FrameLimits {
    fn default() -> Self {
        FrameLimits {
            min_bytes: DEFAULT_MIN_FRAME_BYTES,
            max_bytes: DEFAULT_MAX_FRAME_BYTES,
        }
    }
}

impl FrameLimits {
    pub fn check(&self, size_bytes: u32) -> Result<(), TrafficError> {
        if size_bytes < self.min_bytes || size_bytes > self.max_bytes {
            return Err(TrafficError::FrameSize {
                size: size_bytes,
                min: self.min_bytes,
                max: self.max_bytes,
            });
        }
        Ok(())
    }
}

/// Wire time of `size_bytes + overhead_bytes` at `link_rate_bps`, rounded to
/// the nearest nanosecond.
pub fn transmission_time(
    size_bytes: u64,
    link_rate_bps: u64,
    overhead_bytes: u64,
) -> Result<u64, TrafficError> {
    if link_rate_bps == 0 {
        return Err(TrafficError::ZeroRate);
    }
    let bits = (size_bytes as u128 + overhead_bytes as u128) * 8;
    let rate = link_rate_bps as u128;
    Ok(((bits * 1_000_000_000 + rate / 2) / rate) as u64)
}
