//! Delay tracking, per-cycle delivery statistics and closed-form delay models.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use statrs::statistics::Statistics;
use thiserror::Error;

use crate::engine::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("histogram has no attempts")]
    EmptyHistogram,
    #[error("probability {name}={value} outside its valid range")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// How a gateway reception closes outstanding status changes of a sensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupersedePolicy {
    /// A report closes every pending change at or before the one it carries.
    #[default]
    CloseOnNewer,
    /// A report closes only the change it carries.
    Strict,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelaySample {
    pub sensor: NodeId,
    pub status_changed_at: f64,
    pub delay: Option<f64>,
    pub cycles_waited: Option<u32>,
    pub censored: bool,
    /// Closed by a report of a later change rather than by its own packet.
    #[serde(default)]
    pub superseded: bool,
}

const TIME_EPS: f64 = 1e-9;

/// Time from each status change until the gateway first knows it.
#[derive(Clone, Debug)]
pub struct DelayTracker {
    pending: Vec<VecDeque<f64>>,
    samples: Vec<DelaySample>,
    policy: SupersedePolicy,
}

impl DelayTracker {
    pub fn new(nodes: usize, policy: SupersedePolicy) -> Self {
        Self {
            pending: vec![VecDeque::new(); nodes],
            samples: Vec::new(),
            policy,
        }
    }

    pub fn record_status_change(&mut self, sensor: NodeId, at: f64) {
        self.pending[sensor.index()].push_back(at);
    }

    /// Closes the changes answered by a report received at `now`. Returns the
    /// number of changes closed.
    pub fn record_gateway_reception(
        &mut self,
        sensor: NodeId,
        status_changed_at: f64,
        now: f64,
        cycle_length: f64,
    ) -> usize {
        let queue = &mut self.pending[sensor.index()];
        let mut closed = Vec::new();
        match self.policy {
            SupersedePolicy::CloseOnNewer => {
                while queue
                    .front()
                    .is_some_and(|&t| t <= status_changed_at + TIME_EPS)
                {
                    closed.push(queue.pop_front().expect("front exists"));
                }
            }
            SupersedePolicy::Strict => {
                if let Some(i) = queue
                    .iter()
                    .position(|&t| (t - status_changed_at).abs() <= TIME_EPS)
                {
                    closed.push(queue.remove(i).expect("index exists"));
                }
            }
        }
        for &t in &closed {
            let delay = (now - t).max(0.0);
            self.samples.push(DelaySample {
                sensor,
                status_changed_at: t,
                delay: Some(delay),
                cycles_waited: Some(cycle_index(delay, cycle_length)),
                censored: false,
                superseded: (t - status_changed_at).abs() > TIME_EPS,
            });
        }
        closed.len()
    }

    /// Marks every change still pending as censored.
    pub fn finish(&mut self) {
        for (i, q) in self.pending.iter_mut().enumerate() {
            for t in q.drain(..) {
                self.samples.push(DelaySample {
                    sensor: NodeId(i as u32),
                    status_changed_at: t,
                    delay: None,
                    cycles_waited: None,
                    censored: true,
                    superseded: false,
                });
            }
        }
    }

    pub fn pending(&self) -> usize {
        self.pending.iter().map(VecDeque::len).sum()
    }

    pub fn samples(&self) -> &[DelaySample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<DelaySample> {
        self.samples
    }
}

/// 1-based duty cycle in which an event `delay` seconds after its trigger falls.
pub fn cycle_index(delay: f64, cycle_length: f64) -> u32 {
    ((delay / cycle_length).floor() as u32).saturating_add(1)
}

/// Deliveries per cycle index plus drops.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CycleHistogram {
    /// `counts[i]` holds deliveries in cycle `i + 1`.
    pub counts: Vec<u64>,
    pub dropped: u64,
}

impl CycleHistogram {
    pub fn record_delivery(&mut self, cycle: u32) {
        let i = cycle.max(1) as usize - 1;
        if self.counts.len() <= i {
            self.counts.resize(i + 1, 0);
        }
        self.counts[i] += 1;
    }

    pub fn record_drop(&mut self) {
        self.dropped += 1;
    }

    pub fn delivered(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn attempts(&self) -> u64 {
        self.delivered() + self.dropped
    }

    pub fn merge(&mut self, other: &CycleHistogram) {
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.dropped += other.dropped;
    }
}

/// Conditional probability of delivery in cycle `i` given no delivery before.
pub fn estimate_cycle_probabilities(h: &CycleHistogram) -> Result<Vec<f64>, MetricsError> {
    let mut remaining = h.attempts();
    if remaining == 0 {
        return Err(MetricsError::EmptyHistogram);
    }
    let mut p = Vec::with_capacity(h.counts.len());
    for &c in &h.counts {
        if remaining == 0 {
            break;
        }
        p.push(c as f64 / remaining as f64);
        remaining -= c;
    }
    Ok(p)
}

fn check_prob(name: &'static str, value: f64, allow_zero: bool) -> Result<(), MetricsError> {
    let ok = value.is_finite() && value <= 1.0 && (value > 0.0 || (allow_zero && value == 0.0));
    if ok {
        Ok(())
    } else {
        Err(MetricsError::InvalidProbability { name, value })
    }
}

fn check_cycle(t_dc: f64) -> Result<(), MetricsError> {
    if t_dc.is_finite() && t_dc > 0.0 {
        Ok(())
    } else {
        Err(MetricsError::InvalidInput(format!(
            "cycle length must be > 0, got {t_dc}"
        )))
    }
}

/// Mean delay from per-cycle success probabilities, with each delivery
/// placed mid-cycle.
pub fn analytic_delay_general(p: &[f64], t_dc: f64) -> Result<f64, MetricsError> {
    check_cycle(t_dc)?;
    let mut survive = 1.0;
    let mut e = 0.0;
    for (i, &pk) in p.iter().enumerate() {
        check_prob("p_k", pk, true)?;
        e += pk * survive * (i as f64 + 0.5) * t_dc;
        survive *= 1.0 - pk;
    }
    Ok(e)
}

/// Schedule-based delay, every cycle succeeding with `p1`.
pub fn analytic_delay_schedule(p1: f64, t_dc: f64) -> Result<f64, MetricsError> {
    check_cycle(t_dc)?;
    check_prob("p1", p1, false)?;
    Ok(t_dc * (1.0 / p1 - 0.5))
}

/// Contention-based delay, first cycle `p1`, later cycles `p2`.
pub fn analytic_delay_contention(p1: f64, p2: f64, t_dc: f64) -> Result<f64, MetricsError> {
    check_cycle(t_dc)?;
    check_prob("p1", p1, true)?;
    check_prob("p2", p2, false)?;
    Ok(t_dc * ((1.0 - p1) / p2 + 0.5))
}

/// Delay for periodic reporting every `omega` seconds.
pub fn analytic_delay_periodic(omega: f64, p1: f64, p2: f64, t_dc: f64) -> Result<f64, MetricsError> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(MetricsError::InvalidInput(format!(
            "reporting period must be > 0, got {omega}"
        )));
    }
    Ok(omega / 2.0 + analytic_delay_contention(p1, p2, t_dc)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InsightInputs {
    pub sensors: usize,
    pub mean_occupied: f64,
    pub mean_vacant: f64,
    pub slot: f64,
    pub inactive: f64,
    pub omega: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Insights {
    /// Largest schedule slot that still finishes a cycle within half a status period.
    pub slot_max: f64,
    /// Cell size at which one schedule cycle equals the reporting period.
    pub max_nodes_periodic: Option<f64>,
    pub schedule_recommended: bool,
    /// The sensor count sits exactly on the recommendation threshold.
    pub at_boundary: bool,
    pub recommendation_threshold: f64,
}

pub const SCHEDULE_RATIO: f64 = 0.3;

pub fn insight_thresholds(inp: &InsightInputs) -> Result<Insights, MetricsError> {
    if inp.sensors == 0 {
        return Err(MetricsError::InvalidInput("sensors must be >= 1".into()));
    }
    for (name, v) in [
        ("mean_occupied", inp.mean_occupied),
        ("mean_vacant", inp.mean_vacant),
        ("slot", inp.slot),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(MetricsError::InvalidInput(format!("{name} must be > 0, got {v}")));
        }
    }
    let n = inp.sensors as f64;
    let half_cycle = 0.5 * inp.mean_occupied + 0.5 * inp.mean_vacant;
    let threshold = SCHEDULE_RATIO * half_cycle;
    let at_boundary = (n - threshold).abs() <= 1e-9 * threshold.max(1.0);
    let max_nodes_periodic = match inp.omega {
        Some(w) if w.is_finite() && w > 0.0 => Some((w - inp.inactive) / inp.slot - 1.0),
        Some(w) => {
            return Err(MetricsError::InvalidInput(format!("omega must be > 0, got {w}")));
        }
        None => None,
    };
    Ok(Insights {
        slot_max: half_cycle / n,
        max_nodes_periodic,
        schedule_recommended: n > threshold && !at_boundary,
        at_boundary,
        recommendation_threshold: threshold,
    })
}

/// Mean, sample standard deviation and standard error of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    let mean = if n == 0 { f64::NAN } else { xs.mean() };
    let std = if n < 2 { 0.0 } else { xs.std_dev() };
    Summary {
        n,
        mean,
        std,
        stderr: if n == 0 { f64::NAN } else { std / (n as f64).sqrt() },
    }
}
