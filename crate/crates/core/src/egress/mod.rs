//! Egress side of a port: scheduled gates, launch-time queuing, preemption.

mod etf;
mod gcl;
mod preemption;
mod taprio;

pub use etf::{
    launch_time, EtfEnqueue, EtfQueue, DEFAULT_OFFLOAD_DELTA_NS, DEFAULT_SOFTWARE_DELTA_NS,
};
pub use gcl::{GateControlList, GateEntry, GateState, ALL_GATES_OPEN};
pub use preemption::{
    preempt_transmit, PreemptPoint, PreemptableTx, PreemptionConfig, ResumePlan,
    DEFAULT_MIN_FRAGMENT_BYTES,
};
pub use taprio::{
    EnqueueOutcome, GuardMode, Selected, TaprioPort, DEFAULT_QUEUE_CAPACITY, NUM_CLASSES,
};

use thiserror::Error;

use crate::sim::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EgressError {
    #[error("gate control list has no entries")]
    EmptyGcl,
    #[error("gate entry {0} has zero duration")]
    ZeroDuration(usize),
    #[error("entry durations sum to {sum} ns but cycle time is {cycle} ns")]
    CycleMismatch { sum: u64, cycle: u64 },
    #[error("cycle time overflows")]
    CycleOverflow,
    #[error("{t} precedes schedule base time {base}")]
    BeforeBaseTime { t: SimTime, base: SimTime },
    #[error("frame {0} has no launch time")]
    MissingTxtime(u64),
    #[error("ongoing transmission cannot be preempted")]
    NotPreemptable,
}
