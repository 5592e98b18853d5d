//! Parking occupancy processes and packet generation.

mod count;

pub use count::{count_probability, delta_coefficient, DeltaTable};

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TrafficError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("transition requested at {now} but the next toggle is at {expected}")]
    NotAtTransition { now: f64, expected: f64 },
    #[error("count series did not converge within {0} terms")]
    NonConvergence(usize),
    #[error("count series loses precision (largest term {0:e}); use a sampled estimate")]
    PrecisionLoss(f64),
}

fn check_positive(name: &str, v: f64) -> Result<(), TrafficError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(TrafficError::InvalidParameter(format!(
            "{name} must be finite and > 0, got {v}"
        )))
    }
}

/// Two-parameter Weibull distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    scale: f64,
    shape: f64,
}

impl WeibullParams {
    pub fn new(scale: f64, shape: f64) -> Result<Self, TrafficError> {
        check_positive("scale", scale)?;
        check_positive("shape", shape)?;
        Ok(Self { scale, shape })
    }

    /// Weibull with the given mean and shape.
    pub fn from_mean(mean: f64, shape: f64) -> Result<Self, TrafficError> {
        check_positive("mean", mean)?;
        check_positive("shape", shape)?;
        Self::new(mean / gamma(1.0 + 1.0 / shape), shape)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn mean(&self) -> f64 {
        self.scale * gamma(1.0 + 1.0 / self.shape)
    }

    pub fn variance(&self) -> f64 {
        let g1 = gamma(1.0 + 1.0 / self.shape);
        let g2 = gamma(1.0 + 2.0 / self.shape);
        self.scale * self.scale * (g2 - g1 * g1)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            1.0 - self.survival(t)
        }
    }

    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            1.0
        } else {
            (-(t / self.scale).powf(self.shape)).exp()
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_weibull(self, rng)
    }

    /// Draw from the stationary residual-life distribution: a length-biased
    /// interval with a uniform position inside it.
    pub fn sample_residual<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = Gamma::new(1.0 + 1.0 / self.shape, 1.0).expect("valid gamma shape");
        loop {
            let len = self.scale * g.sample(rng).powf(1.0 / self.shape);
            let r = rng.random::<f64>() * len;
            if r > 0.0 {
                return r;
            }
        }
    }
}

/// Inverse-CDF Weibull draw. Always strictly positive.
pub fn sample_weibull<R: Rng + ?Sized>(params: &WeibullParams, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        let t = params.scale * (-(1.0 - u).ln()).powf(1.0 / params.shape);
        if t > 0.0 && t.is_finite() {
            return t;
        }
    }
}

/// Long-run fraction of time a space is occupied.
///
/// `lambda`/`alpha` are the scale/shape of occupied durations, `mu`/`beta` those
/// of vacant durations.
pub fn occupancy_rate(lambda: f64, alpha: f64, mu: f64, beta: f64) -> Result<f64, TrafficError> {
    check_positive("lambda", lambda)?;
    check_positive("alpha", alpha)?;
    check_positive("mu", mu)?;
    check_positive("beta", beta)?;
    let occ = lambda * gamma(1.0 + 1.0 / alpha);
    let vac = mu * gamma(1.0 + 1.0 / beta);
    Ok(occ / (occ + vac))
}

/// Occupied/vacant Weibull pair for one parking space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTraffic {
    pub occupied: WeibullParams,
    pub vacant: WeibullParams,
}

impl SpaceTraffic {
    pub fn new(lambda: f64, alpha: f64, mu: f64, beta: f64) -> Result<Self, TrafficError> {
        Ok(Self {
            occupied: WeibullParams::new(lambda, alpha)?,
            vacant: WeibullParams::new(mu, beta)?,
        })
    }

    /// Occupied and vacant means both equal to half the mean cycle.
    pub fn symmetric(mean_cycle: f64, shape: f64) -> Result<Self, TrafficError> {
        check_positive("mean_cycle", mean_cycle)?;
        let w = WeibullParams::from_mean(mean_cycle / 2.0, shape)?;
        Ok(Self {
            occupied: w,
            vacant: w,
        })
    }

    pub fn mean_cycle(&self) -> f64 {
        self.occupied.mean() + self.vacant.mean()
    }

    pub fn occupancy_rate(&self) -> f64 {
        self.occupied.mean() / self.mean_cycle()
    }
}

/// Expected number of status changes across all spaces over `dt` seconds.
pub fn expected_packet_count(spaces: &[SpaceTraffic], dt: f64) -> Result<f64, TrafficError> {
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(TrafficError::InvalidParameter(format!(
            "dt must be finite and >= 0, got {dt}"
        )));
    }
    Ok(spaces.iter().map(|s| 2.0 * dt / s.mean_cycle()).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OccupancyStatus {
    Occupied,
    Vacant,
}

impl OccupancyStatus {
    pub fn flipped(self) -> Self {
        match self {
            Self::Occupied => Self::Vacant,
            Self::Vacant => Self::Occupied,
        }
    }
}

/// How a process starts at time zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitPolicy {
    /// Status drawn from the occupancy rate, first duration a full draw.
    #[default]
    Fresh,
    /// Status drawn from the occupancy rate, first duration a residual-life draw.
    Stationary,
}

/// Alternating occupied/vacant renewal process for one space.
#[derive(Clone, Debug, PartialEq)]
pub struct ParkingProcess {
    traffic: SpaceTraffic,
    status: OccupancyStatus,
    status_since: f64,
    next_toggle_at: f64,
}

impl ParkingProcess {
    pub fn start<R: Rng + ?Sized>(
        traffic: SpaceTraffic,
        status: OccupancyStatus,
        now: f64,
        rng: &mut R,
    ) -> Self {
        let d = Self::dist(&traffic, status).sample(rng);
        Self {
            traffic,
            status,
            status_since: now,
            next_toggle_at: now + d,
        }
    }

    pub fn initialize<R: Rng + ?Sized>(
        traffic: SpaceTraffic,
        policy: InitPolicy,
        status_rng: &mut R,
        duration_rng: &mut R,
    ) -> Self {
        let status = if status_rng.random::<f64>() < traffic.occupancy_rate() {
            OccupancyStatus::Occupied
        } else {
            OccupancyStatus::Vacant
        };
        match policy {
            InitPolicy::Fresh => Self::start(traffic, status, 0.0, duration_rng),
            InitPolicy::Stationary => {
                let d = Self::dist(&traffic, status).sample_residual(duration_rng);
                Self {
                    traffic,
                    status,
                    status_since: 0.0,
                    next_toggle_at: d,
                }
            }
        }
    }

    fn dist(traffic: &SpaceTraffic, status: OccupancyStatus) -> &WeibullParams {
        match status {
            OccupancyStatus::Occupied => &traffic.occupied,
            OccupancyStatus::Vacant => &traffic.vacant,
        }
    }

    pub fn status(&self) -> OccupancyStatus {
        self.status
    }

    pub fn status_since(&self) -> f64 {
        self.status_since
    }

    pub fn next_toggle_at(&self) -> f64 {
        self.next_toggle_at
    }

    /// Performs the toggle due at `now`. Returns the new status and the time
    /// of the following toggle.
    pub fn next_transition<R: Rng + ?Sized>(
        &mut self,
        now: f64,
        rng: &mut R,
    ) -> Result<(OccupancyStatus, f64), TrafficError> {
        let tol = 1e-9 * self.next_toggle_at.abs().max(1.0);
        if (now - self.next_toggle_at).abs() > tol {
            return Err(TrafficError::NotAtTransition {
                now,
                expected: self.next_toggle_at,
            });
        }
        self.status = self.status.flipped();
        self.status_since = self.next_toggle_at;
        let d = Self::dist(&self.traffic, self.status).sample(rng);
        self.next_toggle_at = self.status_since + d;
        Ok((self.status, self.next_toggle_at))
    }
}

/// Phase assignment for periodic reporting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhasePolicy {
    /// Independent uniform phase in `[0, omega)` per sensor.
    #[default]
    Uniform,
    /// Every sensor reports at multiples of `omega`.
    Aligned,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrafficMode {
    EventDriven,
    Periodic { omega: f64, phase: PhasePolicy },
}

/// First periodic report strictly after `now`.
pub fn periodic_next_emit(omega: f64, phase: f64, now: f64) -> f64 {
    if now < phase {
        return phase;
    }
    let n = ((now - phase) / omega).floor() + 1.0;
    phase + n * omega
}
