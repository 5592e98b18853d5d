//! Event queue and simulation clock.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a node in a topology. Dense, zero based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    StatusToggle,
    SlotBegin,
    BeaconEnd,
    DataEnd,
    RadioSwitch,
    AppTimer,
    RouteUpdate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimEvent<P> {
    pub fire_at: f64,
    pub target: NodeId,
    pub kind: EventKind,
    pub payload: P,
}

impl<P> SimEvent<P> {
    pub fn new(fire_at: f64, target: NodeId, kind: EventKind, payload: P) -> Self {
        Self {
            fire_at,
            target,
            kind,
            payload,
        }
    }
}

/// Handle returned by [`Engine::schedule`], usable for cancellation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("event at {fire_at} is earlier than the clock ({now})")]
    PastEvent { fire_at: f64, now: f64 },
    #[error("event time {0} is not finite")]
    NonFinite(f64),
    #[error("horizon {horizon} is earlier than the clock ({now})")]
    HorizonInPast { horizon: f64, now: f64 },
}

struct Entry<P> {
    seq: u64,
    event: SimEvent<P>,
}

impl<P> PartialEq for Entry<P> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<P> Eq for Entry<P> {}

impl<P> PartialOrd for Entry<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Entry<P> {
    // Reversed so the max-heap pops the earliest (time, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .event
            .fire_at
            .total_cmp(&self.event.fire_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Priority queue of timestamped events with a monotone clock.
///
/// Events with equal timestamps fire in insertion order.
pub struct Engine<P> {
    now: f64,
    next_seq: u64,
    heap: BinaryHeap<Entry<P>>,
    cancelled: HashSet<u64>,
    processed: u64,
}

impl<P> Default for Engine<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Engine<P> {
    pub fn new() -> Self {
        Self {
            now: 0.0,
            next_seq: 0,
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
            processed: 0,
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    /// Number of live (not cancelled) events still queued.
    pub fn pending(&self) -> usize {
        self.heap.len() - self.cancelled.len()
    }

    pub fn schedule(&mut self, event: SimEvent<P>) -> Result<EventHandle, EngineError> {
        if !event.fire_at.is_finite() {
            return Err(EngineError::NonFinite(event.fire_at));
        }
        if event.fire_at < self.now {
            return Err(EngineError::PastEvent {
                fire_at: event.fire_at,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { seq, event });
        Ok(EventHandle(seq))
    }

    /// Marks a queued event as cancelled. Returns false if it already fired
    /// or was cancelled before.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if handle.0 >= self.next_seq {
            return false;
        }
        let live = self.heap.iter().any(|e| e.seq == handle.0);
        live && self.cancelled.insert(handle.0)
    }

    fn peek_live_time(&mut self) -> Option<f64> {
        while let Some(top) = self.heap.peek() {
            if self.cancelled.remove(&top.seq) {
                self.heap.pop();
                continue;
            }
            return Some(top.event.fire_at);
        }
        None
    }

    /// Removes the earliest live event and advances the clock to it.
    pub fn pop(&mut self) -> Option<SimEvent<P>> {
        self.peek_live_time()?;
        let entry = self.heap.pop()?;
        self.now = entry.event.fire_at;
        self.processed += 1;
        Some(entry.event)
    }

    /// Dispatches every event with `fire_at <= horizon`, then sets the clock to
    /// the horizon. Returns the number of events handled.
    pub fn run_until<F>(&mut self, horizon: f64, mut handler: F) -> Result<u64, EngineError>
    where
        F: FnMut(&mut Engine<P>, SimEvent<P>),
    {
        if horizon < self.now {
            return Err(EngineError::HorizonInPast {
                horizon,
                now: self.now,
            });
        }
        let mut handled = 0;
        while let Some(t) = self.peek_live_time() {
            if t > horizon {
                break;
            }
            let ev = self.pop().expect("peeked event");
            handler(self, ev);
            handled += 1;
        }
        self.now = horizon;
        Ok(handled)
    }
}
