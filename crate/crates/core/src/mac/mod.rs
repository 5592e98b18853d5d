//! Duty-cycled MAC: cycle timing, queues, slot ownership and backoff.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::NodeId;
use crate::traffic::OccupancyStatus;

#[derive(Debug, Error, PartialEq)]
pub enum MacError {
    #[error("invalid MAC configuration: {0}")]
    InvalidConfig(String),
    #[error("maximum backoff plus one exchange ({needed:.6} s) does not fit in a slot of {slot} s")]
    BackoffExceedsSlot { needed: f64, slot: f64 },
    #[error("slot {index} is outside a cycle with {slots} slots")]
    SlotOutOfRange { index: usize, slots: usize },
    #[error("node {0} owns no slot in this cell")]
    NotAMember(NodeId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MacMode {
    Schedule,
    Contention,
}

impl MacMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Schedule => "schedule",
            Self::Contention => "contention",
        }
    }
}

/// Timing and backoff parameters shared by every node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DutyCycleConfig {
    pub mode: MacMode,
    /// Active slot length in seconds.
    pub slot: f64,
    /// Sleep period appended to each cycle, in seconds.
    pub inactive: f64,
    pub cw_min: u32,
    pub cw_max: u32,
    /// Backoff unit in seconds.
    pub backoff_unit: f64,
    pub max_retries: u32,
    /// Airtime of beacon, grant and ack frames.
    pub control_airtime: f64,
    /// Rx/tx turnaround gap between frames of one exchange.
    pub turnaround: f64,
    pub sensor_queue_capacity: usize,
    pub router_queue_capacity: usize,
}

impl Default for DutyCycleConfig {
    fn default() -> Self {
        Self {
            mode: MacMode::Contention,
            slot: 0.1,
            inactive: 0.0,
            cw_min: 8,
            cw_max: 32,
            backoff_unit: 320e-6,
            max_retries: 5,
            control_airtime: 0.4e-3,
            turnaround: 0.192e-3,
            sensor_queue_capacity: 64,
            router_queue_capacity: 1024,
        }
    }
}

impl DutyCycleConfig {
    pub fn exchange(&self, data_airtime: f64) -> ExchangeTiming {
        ExchangeTiming {
            control: self.control_airtime,
            turnaround: self.turnaround,
            data: data_airtime,
        }
    }

    pub fn validate(&self, data_airtime: f64) -> Result<(), MacError> {
        let bad = |m: String| Err(MacError::InvalidConfig(m));
        if !(self.slot.is_finite() && self.slot > 0.0) {
            return bad(format!("slot must be > 0, got {}", self.slot));
        }
        if !(self.inactive.is_finite() && self.inactive >= 0.0) {
            return bad(format!("inactive must be >= 0, got {}", self.inactive));
        }
        if self.cw_min == 0 || self.cw_max < self.cw_min {
            return bad(format!(
                "need 1 <= cw_min <= cw_max, got {} and {}",
                self.cw_min, self.cw_max
            ));
        }
        if !(self.backoff_unit.is_finite() && self.backoff_unit > 0.0) {
            return bad(format!("backoff_unit must be > 0, got {}", self.backoff_unit));
        }
        if !(self.control_airtime > 0.0 && self.turnaround >= 0.0 && data_airtime > 0.0) {
            return bad("frame timings must be positive".into());
        }
        if self.sensor_queue_capacity == 0 || self.router_queue_capacity == 0 {
            return bad("queue capacities must be >= 1".into());
        }
        let exchange = self.exchange(data_airtime).total();
        let backoff = match self.mode {
            MacMode::Contention => f64::from(self.cw_max - 1) * self.backoff_unit,
            MacMode::Schedule => 0.0,
        };
        if backoff + exchange > self.slot + 1e-12 {
            return Err(MacError::BackoffExceedsSlot {
                needed: backoff + exchange,
                slot: self.slot,
            });
        }
        Ok(())
    }
}

/// Length of one duty cycle for a cell with `n` member slots.
pub fn duty_cycle_length(mode: MacMode, slot: f64, inactive: f64, n: usize) -> f64 {
    match mode {
        MacMode::Schedule => slot * (n as f64 + 1.0) + inactive,
        MacMode::Contention => slot + inactive,
    }
}

/// Frame layout of one beacon/grant/data/ack exchange, relative to its start.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExchangeTiming {
    pub control: f64,
    pub turnaround: f64,
    pub data: f64,
}

impl ExchangeTiming {
    pub fn beacon(&self) -> (f64, f64) {
        (0.0, self.control)
    }

    pub fn grant(&self) -> (f64, f64) {
        let s = self.control + self.turnaround;
        (s, s + self.control)
    }

    pub fn data(&self) -> (f64, f64) {
        let s = 2.0 * (self.control + self.turnaround);
        (s, s + self.data)
    }

    pub fn ack(&self) -> (f64, f64) {
        let s = self.data().1 + self.turnaround;
        (s, s + self.control)
    }

    pub fn total(&self) -> f64 {
        self.ack().1
    }
}

/// Status report carried from a sensor to the gateway.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Packet {
    pub source: NodeId,
    pub seq: u64,
    pub status: OccupancyStatus,
    pub status_changed_at: f64,
    pub created_at: f64,
    /// Failed attempts on the current hop.
    pub retries: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueuePolicy {
    /// FIFO; arrivals beyond capacity are dropped.
    Append,
    /// Only the freshest report is kept.
    ReplaceStale,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EnqueueOutcome {
    Queued,
    /// A stale report was overwritten and will never be sent.
    Replaced(Packet),
    /// The queue was full; the new packet was discarded.
    Overflow(Packet),
}

#[derive(Clone, Debug)]
pub struct TxQueue {
    pending: VecDeque<Packet>,
    capacity: usize,
}

impl TxQueue {
    pub fn new(capacity: usize) -> Self {
        Self {
            pending: VecDeque::new(),
            capacity: capacity.max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn head(&self) -> Option<&Packet> {
        self.pending.front()
    }

    pub fn head_mut(&mut self) -> Option<&mut Packet> {
        self.pending.front_mut()
    }

    pub fn pop(&mut self) -> Option<Packet> {
        self.pending.pop_front()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Packet> {
        self.pending.iter()
    }

    pub fn enqueue(&mut self, packet: Packet, policy: QueuePolicy) -> EnqueueOutcome {
        match policy {
            QueuePolicy::ReplaceStale => {
                if let Some(old) = self.pending.pop_front() {
                    self.pending.clear();
                    self.pending.push_back(packet);
                    EnqueueOutcome::Replaced(old)
                } else {
                    self.pending.push_back(packet);
                    EnqueueOutcome::Queued
                }
            }
            QueuePolicy::Append => {
                if self.pending.len() >= self.capacity {
                    EnqueueOutcome::Overflow(packet)
                } else {
                    self.pending.push_back(packet);
                    EnqueueOutcome::Queued
                }
            }
        }
    }
}

/// Slot map of one schedule-based cell. Slot 0 belongs to the coordinator
/// beacon; slot `i >= 1` belongs to `members[i - 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleLayout {
    pub coordinator: NodeId,
    pub members: Vec<NodeId>,
}

impl ScheduleLayout {
    pub fn new(coordinator: NodeId, members: Vec<NodeId>) -> Self {
        Self {
            coordinator,
            members,
        }
    }

    pub fn slots(&self) -> usize {
        self.members.len() + 1
    }

    pub fn slot_owner(&self, index: usize) -> Result<NodeId, MacError> {
        match index {
            0 => Ok(self.coordinator),
            i if i <= self.members.len() => Ok(self.members[i - 1]),
            i => Err(MacError::SlotOutOfRange {
                index: i,
                slots: self.slots(),
            }),
        }
    }

    pub fn slot_of(&self, node: NodeId) -> Result<usize, MacError> {
        self.members
            .iter()
            .position(|&m| m == node)
            .map(|p| p + 1)
            .ok_or(MacError::NotAMember(node))
    }
}

/// Start of the first owned slot strictly after `now`, for a cell whose cycle
/// `c` starts at `c * cycle`. Returns the cycle number and the start time.
pub fn next_owned_slot(slot_index: usize, slot: f64, cycle: f64, now: f64) -> (u64, f64) {
    next_cycle_time(slot_index as f64 * slot, cycle, now)
}

/// First time of the form `c * cycle + offset` strictly after `now`.
pub fn next_cycle_time(offset: f64, cycle: f64, now: f64) -> (u64, f64) {
    let mut c = ((now - offset) / cycle).floor().max(0.0) as u64;
    loop {
        let t = c as f64 * cycle + offset;
        if t > now {
            return (c, t);
        }
        c += 1;
    }
}

/// Result of one transmission attempt.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttemptOutcome {
    Success,
    Collision,
    /// Lost to fading, sensitivity or a busy receiver.
    Lost,
    /// Heard another transmission first and stayed silent.
    Deferred,
}

/// Uniform backoff count in `[0, cw)`.
pub fn contention_draw<R: Rng + ?Sized>(cw: u32, rng: &mut R) -> u32 {
    rng.random_range(0..cw.max(1))
}

/// Binary exponential backoff update.
pub fn backoff_window_update(prev: u32, outcome: AttemptOutcome, cw_min: u32, cw_max: u32) -> u32 {
    match outcome {
        AttemptOutcome::Success => cw_min,
        AttemptOutcome::Collision | AttemptOutcome::Lost => prev.saturating_mul(2).min(cw_max),
        AttemptOutcome::Deferred => prev,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ContentionOutcome {
    Idle,
    Winner(NodeId),
    Collision(Vec<NodeId>),
}

/// One contention round on an ideal shared channel where every contender
/// hears every other: the smallest backoff wins, equal smallest collide.
pub fn contention_slot<R: Rng + ?Sized>(
    contenders: &[(NodeId, u32)],
    rng: &mut R,
) -> (ContentionOutcome, Vec<u32>) {
    let draws: Vec<u32> = contenders
        .iter()
        .map(|&(_, cw)| contention_draw(cw, rng))
        .collect();
    let Some(&best) = draws.iter().min() else {
        return (ContentionOutcome::Idle, draws);
    };
    let winners: Vec<NodeId> = contenders
        .iter()
        .zip(&draws)
        .filter(|(_, &d)| d == best)
        .map(|(&(id, _), _)| id)
        .collect();
    let outcome = if winners.len() == 1 {
        ContentionOutcome::Winner(winners[0])
    } else {
        ContentionOutcome::Collision(winners)
    };
    (outcome, draws)
}
