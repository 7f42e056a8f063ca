//! Discrete-event engine.
//!
//! Events are ordered by `(fire_time, sequence)`; the sequence number is
//! assigned at insertion so events sharing a fire time execute FIFO.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::time::SimTime;
use super::SimError;

/// Opaque handle returned by [`Engine::schedule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventHandle(pub u64);

#[derive(Debug)]
struct Scheduled<E> {
    fire_time: SimTime,
    seq: u64,
    action: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_time == other.fire_time && self.seq == other.seq
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        (other.fire_time, other.seq).cmp(&(self.fire_time, self.seq))
    }
}

#[derive(Debug)]
pub struct Engine<E> {
    now: SimTime,
    next_seq: u64,
    executed: u64,
    queue: BinaryHeap<Scheduled<E>>,
}

impl<E> Default for Engine<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Engine<E> {
    pub fn new() -> Self {
        Engine {
            now: SimTime::ZERO,
            next_seq: 0,
            executed: 0,
            queue: BinaryHeap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
    }

    /// Total number of events executed so far.
    pub fn executed(&self) -> u64 {
        self.executed
    }

    pub fn schedule(&mut self, fire_time: SimTime, action: E) -> Result<EventHandle, SimError> {
        if fire_time < self.now {
            return Err(SimError::PastTime {
                requested: fire_time,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Scheduled {
            fire_time,
            seq,
            action,
        });
        Ok(EventHandle(seq))
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.queue.peek().map(|s| s.fire_time)
    }

    /// Pop the next event and advance the clock to its fire time.
    pub fn pop_next(&mut self) -> Option<(SimTime, E)> {
        let ev = self.queue.pop()?;
        debug_assert!(ev.fire_time >= self.now);
        self.now = ev.fire_time;
        self.executed += 1;
        Some((ev.fire_time, ev.action))
    }

    /// Like [`Engine::pop_next`] but leaves events later than `t_end` queued.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<(SimTime, E)> {
        match self.peek_time() {
            Some(t) if t <= t_end => self.pop_next(),
            _ => None,
        }
    }

    /// Execute every event with `fire_time <= t_end`, including events the
    /// handler schedules along the way, then set the clock to `t_end`.
    /// Returns the number of events executed by this call.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Engine<E>, SimTime, E),
    {
        let mut count = 0;
        while let Some((t, action)) = self.pop_until(t_end) {
            handler(self, t, action);
            count += 1;
        }
        if t_end > self.now {
            self.now = t_end;
        }
        count
    }
}
