//! Propagation, reception and radio energy accounting.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RadioError {
    #[error("invalid radio parameter: {0}")]
    InvalidParameter(String),
    #[error("negative duration {0} for radio state accrual")]
    NegativeDuration(f64),
}

/// Radio hardware and propagation parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioParams {
    /// Sensor transmit power in dBm.
    pub tpo_dbm: f64,
    /// Repeater and gateway transmit power in dBm.
    pub ffd_tpo_dbm: f64,
    pub sensitivity_dbm: f64,
    pub data_rate_bps: f64,
    pub wavelength_m: f64,
    pub p_tx_w: f64,
    pub p_rx_w: f64,
    pub p_cs_w: f64,
    pub p_off_w: f64,
    /// Energy of one transition between off and an active state, in joules.
    pub switch_energy_j: f64,
    pub packet_bytes: u32,
    pub corner_loss_db: f64,
    pub capture_threshold_db: f64,
    /// Required margin above sensitivity for a link to be used in routing.
    pub link_margin_db: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            tpo_dbm: 3.0,
            ffd_tpo_dbm: 3.0,
            sensitivity_dbm: -85.0,
            data_rate_bps: 250_000.0,
            wavelength_m: 0.125,
            p_tx_w: 65.7e-3,
            p_rx_w: 56.5e-3,
            p_cs_w: 55.8e-3,
            p_off_w: 30e-6,
            switch_energy_j: 0.16425e-3,
            packet_bytes: 84,
            corner_loss_db: 20.0,
            capture_threshold_db: 6.0,
            link_margin_db: 10.0,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), RadioError> {
        let positive = [
            ("data_rate_bps", self.data_rate_bps),
            ("wavelength_m", self.wavelength_m),
            ("p_tx_w", self.p_tx_w),
            ("p_rx_w", self.p_rx_w),
            ("p_cs_w", self.p_cs_w),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(RadioError::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("p_off_w", self.p_off_w),
            ("switch_energy_j", self.switch_energy_j),
            ("corner_loss_db", self.corner_loss_db),
            ("capture_threshold_db", self.capture_threshold_db),
            ("link_margin_db", self.link_margin_db),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(RadioError::InvalidParameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.packet_bytes == 0 {
            return Err(RadioError::InvalidParameter("packet_bytes must be > 0".into()));
        }
        for (name, v) in [
            ("tpo_dbm", self.tpo_dbm),
            ("ffd_tpo_dbm", self.ffd_tpo_dbm),
            ("sensitivity_dbm", self.sensitivity_dbm),
        ] {
            if !v.is_finite() {
                return Err(RadioError::InvalidParameter(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    pub fn data_airtime(&self) -> f64 {
        airtime(self.packet_bytes, self.data_rate_bps)
    }
}

/// Seconds needed to send `bytes` at `rate_bps`.
pub fn airtime(bytes: u32, rate_bps: f64) -> f64 {
    f64::from(bytes) * 8.0 / rate_bps
}

/// Free-space loss in dB. Distances under one metre are treated as one metre.
pub fn free_space_loss_db(distance_m: f64, wavelength_m: f64) -> f64 {
    let d = distance_m.max(1.0);
    20.0 * (4.0 * std::f64::consts::PI * d / wavelength_m).log10()
}

/// Free-space loss plus a fixed penalty per street corner between the ends.
pub fn path_loss_db(distance_m: f64, corners: u32, params: &RadioParams) -> f64 {
    free_space_loss_db(distance_m, params.wavelength_m) + f64::from(corners) * params.corner_loss_db
}

pub fn mean_rx_power_dbm(tpo_dbm: f64, distance_m: f64, corners: u32, params: &RadioParams) -> f64 {
    tpo_dbm - path_loss_db(distance_m, corners, params)
}

/// Rayleigh fading as a dB offset on received power (unit-mean exponential gain).
pub fn rayleigh_fade_db<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        let g = -(1.0 - u).ln();
        if g > 0.0 {
            return 10.0 * g.log10();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LinkOutcome {
    Delivered,
    LostFade,
    LostCollision,
    BelowSensitivity,
}

/// Decides reception of one frame given its faded power and the faded powers
/// of every overlapping frame at the same receiver.
pub fn resolve_reception(
    mean_signal_dbm: f64,
    fade_db: f64,
    interferers_dbm: &[f64],
    params: &RadioParams,
) -> LinkOutcome {
    if mean_signal_dbm < params.sensitivity_dbm {
        return LinkOutcome::BelowSensitivity;
    }
    let signal = mean_signal_dbm + fade_db;
    let strongest = interferers_dbm
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if strongest > signal - params.capture_threshold_db {
        return LinkOutcome::LostCollision;
    }
    if signal < params.sensitivity_dbm {
        return LinkOutcome::LostFade;
    }
    LinkOutcome::Delivered
}

/// [`resolve_reception`] with fresh fades for the signal and every interferer.
pub fn link_delivers<R: Rng + ?Sized>(
    mean_signal_dbm: f64,
    interferer_means_dbm: &[f64],
    params: &RadioParams,
    rng: &mut R,
) -> LinkOutcome {
    let fade = rayleigh_fade_db(rng);
    let faded: Vec<f64> = interferer_means_dbm
        .iter()
        .map(|m| m + rayleigh_fade_db(rng))
        .collect();
    resolve_reception(mean_signal_dbm, fade, &faded, params)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadioState {
    Tx,
    Rx,
    CarrierSense,
    Off,
}

impl RadioState {
    pub fn is_active(self) -> bool {
        self != RadioState::Off
    }
}

/// Time spent per radio state plus the number of off/active transitions.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyLedger {
    pub tx_s: f64,
    pub rx_s: f64,
    pub cs_s: f64,
    pub off_s: f64,
    pub switches: u64,
    state: RadioState,
}

impl Default for EnergyLedger {
    fn default() -> Self {
        Self::new(RadioState::Off)
    }
}

impl EnergyLedger {
    pub fn new(initial: RadioState) -> Self {
        Self {
            tx_s: 0.0,
            rx_s: 0.0,
            cs_s: 0.0,
            off_s: 0.0,
            switches: 0,
            state: initial,
        }
    }

    pub fn state(&self) -> RadioState {
        self.state
    }

    /// Changes state, charging a switch when crossing between off and active.
    pub fn switch_to(&mut self, to: RadioState) -> bool {
        let charged = self.state.is_active() != to.is_active();
        if charged {
            self.switches += 1;
        }
        self.state = to;
        charged
    }

    pub fn accrue(&mut self, state: RadioState, duration: f64) -> Result<(), RadioError> {
        if duration.is_nan() || duration < 0.0 {
            return Err(RadioError::NegativeDuration(duration));
        }
        self.switch_to(state);
        match state {
            RadioState::Tx => self.tx_s += duration,
            RadioState::Rx => self.rx_s += duration,
            RadioState::CarrierSense => self.cs_s += duration,
            RadioState::Off => self.off_s += duration,
        }
        Ok(())
    }

    pub fn total_time(&self) -> f64 {
        self.tx_s + self.rx_s + self.cs_s + self.off_s
    }

    pub fn joules(&self, p: &RadioParams) -> f64 {
        self.tx_s * p.p_tx_w
            + self.rx_s * p.p_rx_w
            + self.cs_s * p.p_cs_w
            + self.off_s * p.p_off_w
            + self.switches as f64 * p.switch_energy_j
    }
}
