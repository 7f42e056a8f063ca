//! Per-stream filtering and policing on ingress.

mod psfp;

pub use psfp::{assign_ipv, psfp_process, PsfpDecision, StreamGate, StreamGateEntry, WindowId};
