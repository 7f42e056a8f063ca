use std::collections::BTreeMap;

use super::EgressError;
use crate::sim::{ClockModel, SimTime};
use crate::traffic::Frame;

pub const DEFAULT_OFFLOAD_DELTA_NS: u64 = 50_000;
pub const DEFAULT_SOFTWARE_DELTA_NS: u64 = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtfEnqueue {
    Queued,
    DroppedPastTxtime,
}

/// Earliest-txtime-first queue. Frames are keyed by `(txtime, frame id)`.
#[derive(Debug, Clone)]
pub struct EtfQueue {
    frames: BTreeMap<(SimTime, u64), Frame>,
    /// Lead time: a frame leaves the queue at `txtime - delta_ns`.
    pub delta_ns: u64,
    /// When set, the NIC launches the frame at `txtime` on its own clock.
    pub offload: bool,
}

impl EtfQueue {
    pub fn new(delta_ns: u64, offload: bool) -> Self {
        EtfQueue {
            frames: BTreeMap::new(),
            delta_ns,
            offload,
        }
    }

    pub fn with_default_delta(offload: bool) -> Self {
        let delta = if offload {
            DEFAULT_OFFLOAD_DELTA_NS
        } else {
            DEFAULT_SOFTWARE_DELTA_NS
        };
        Self::new(delta, offload)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `now` is the queue clock's reading. A frame whose launch time is
    /// already closer than `delta_ns` is dropped.
    pub fn enqueue(&mut self, frame: Frame, now: SimTime) -> Result<EtfEnqueue, EgressError> {
        let txtime = frame.txtime.ok_or(EgressError::MissingTxtime(frame.id))?;
        if txtime < now + self.delta_ns {
            return Ok(EtfEnqueue::DroppedPastTxtime);
        }
        self.frames.insert((txtime, frame.id), frame);
        Ok(EtfEnqueue::Queued)
    }

    /// Queue-clock instant at which the head frame is released.
    pub fn next_release(&self) -> Option<SimTime> {
        self.frames
            .keys()
            .next()
            .map(|(tx, _)| SimTime(tx.0.saturating_sub(self.delta_ns)))
    }

    pub fn pop(&mut self) -> Option<Frame> {
        self.frames.pop_first().map(|(_, f)| f)
    }

    /// Remove every frame whose release instant is at or before `now`.
    pub fn pop_due(&mut self, now: SimTime) -> Vec<Frame> {
        let mut out = Vec::new();
        while self.next_release().is_some_and(|r| r <= now) {
            out.extend(self.pop());
        }
        out
    }
}

/// True time at which a released frame may start on the wire.
///
/// With offload the NIC starts it when its PHC reads `txtime`, shifted by a
/// hardware precision sample, but never before it received the frame
/// (`handoff`). Without offload the frame goes out as soon as it reaches the
/// MAC, i.e. at `handoff` if the link is idle.
pub fn launch_time(
    offload: bool,
    txtime: SimTime,
    phc: &ClockModel,
    precision_ns: i64,
    handoff: SimTime,
) -> SimTime {
    if !offload {
        return handoff;
    }
    phc.true_time_for(txtime)
        .offset_by(precision_ns)
        .max(handoff)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tx_frame(id: u64, txtime: u64) -> Frame {
        let mut f = Frame::new(id, 64, 0);
        f.txtime = Some(SimTime(txtime));
        f
    }

    #[test]
    fn future_txtime_queued() {
        let mut q = EtfQueue::new(0, true);
        assert_eq!(
            q.enqueue(tx_frame(1, 2_000_000), SimTime(1_000_000)),
            Ok(EtfEnqueue::Queued)
        );
    }

    #[test]
    fn past_txtime_dropped() {
        let mut q = EtfQueue::new(0, true);
        assert_eq!(
            q.enqueue(tx_frame(1, 999_999), SimTime(1_000_000)),
            Ok(EtfEnqueue::DroppedPastTxtime)
        );
        assert!(q.is_empty());
    }

    #[test]
    fn delta_counts_as_too_late() {
        let mut q = EtfQueue::new(50_000, false);
        assert_eq!(
            q.enqueue(tx_frame(1, 1_040_000), SimTime(1_000_000)),
            Ok(EtfEnqueue::DroppedPastTxtime)
        );
        assert_eq!(
            q.enqueue(tx_frame(2, 1_050_000), SimTime(1_000_000)),
            Ok(EtfEnqueue::Queued)
        );
        assert_eq!(q.next_release(), Some(SimTime(1_000_000)));
    }

    #[test]
    fn missing_txtime() {
        let mut q = EtfQueue::new(0, true);
        assert_eq!(
            q.enqueue(Frame::new(7, 64, 0), SimTime(0)),
            Err(EgressError::MissingTxtime(7))
        );
    }

    #[test]
    fn dequeues_by_txtime() {
        let mut q = EtfQueue::new(0, true);
        q.enqueue(tx_frame(1, 2_000_000), SimTime(0)).unwrap();
        q.enqueue(tx_frame(2, 1_000_000), SimTime(0)).unwrap();
        assert_eq!(q.pop().unwrap().id, 2);
        assert_eq!(q.pop().unwrap().id, 1);
    }

    #[test]
    fn pop_due_releases_prefix() {
        let mut q = EtfQueue::new(10, true);
        for (id, t) in [(1, 100), (2, 200), (3, 300)] {
            q.enqueue(tx_frame(id, t), SimTime(0)).unwrap();
        }
        let due: Vec<u64> = q.pop_due(SimTime(190)).iter().map(|f| f.id).collect();
        assert_eq!(due, vec![1, 2]);
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn offload_identity_launches_at_txtime() {
        let phc = ClockModel::identity();
        assert_eq!(
            launch_time(true, SimTime(1_000_000), &phc, 0, SimTime(900_000)),
            SimTime(1_000_000)
        );
        assert_eq!(
            launch_time(true, SimTime(1_000_000), &phc, 7, SimTime(900_000)),
            SimTime(1_000_007)
        );
    }

    #[test]
    fn offload_follows_phc_offset() {
        let phc = ClockModel::with_offset(100);
        assert_eq!(
            launch_time(true, SimTime(1_000_000), &phc, 0, SimTime(0)),
            SimTime(999_900)
        );
    }

    #[test]
    fn late_handoff_launches_immediately() {
        let phc = ClockModel::identity();
        assert_eq!(
            launch_time(true, SimTime(1_000), &phc, 0, SimTime(5_000)),
            SimTime(5_000)
        );
        assert_eq!(
            launch_time(false, SimTime(9_000), &phc, 0, SimTime(5_000)),
            SimTime(5_000)
        );
    }
}
