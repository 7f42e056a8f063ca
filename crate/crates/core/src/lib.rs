//! Deterministic discrete-event simulator for time-sensitive Ethernet and
//! a harness that measures cyclic traffic the way a hardware-timestamping
//! isochronous test tool does.

pub mod egress;
pub mod harness;
pub mod ingress;
pub mod network;
pub mod redundancy;
pub mod sim;
pub mod traffic;
