//! Event engine, time base, clocks and randomness.

mod clock;
mod engine;
mod jitter;
mod rng;
mod time;

pub use clock::{ClockConfig, ClockModel};
pub use engine::{Engine, EventHandle};
pub use jitter::{JitterDist, NORMAL_TRUNCATION_SIGMAS};
pub use rng::{rng_fork, SimRng, RNG_ALGORITHM};
pub use time::SimTime;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("cannot schedule at {requested}: simulation time is already {now}")]
    PastTime { requested: SimTime, now: SimTime },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
}
