//! Scenario files: a base configuration plus an optional parameter sweep.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mac::{DutyCycleConfig, MacMode};
use crate::metrics::SupersedePolicy;
use crate::network::{build_cross_topology, parse_topology_file, TopologyDescription, PARKING_MAP};
use crate::radio::RadioParams;
use crate::output::PointResult;
use crate::sim::{run_batches, Prepared, SimConfig, SimError, TrafficConfig};
use crate::traffic::{InitPolicy, PhasePolicy, SpaceTraffic, TrafficMode, WeibullParams};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid scenario: {0}")]
    Parse(String),
    #[error("invalid scenario field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("sweep point {index} ({label}): {source}")]
    Point {
        index: usize,
        label: String,
        source: SimError,
    },
}

fn field(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Field {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TopologySpec {
    /// Single cell around a crossroads.
    Cross { sensors: usize },
    /// Built-in urban deployment; repeater tiers follow `radio.tpo_dbm`.
    ParkingMap,
    /// Deployment file, relative paths resolved against the scenario file.
    File { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrafficKind {
    EventDriven,
    Periodic,
}

impl TrafficKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::EventDriven => "event-driven",
            Self::Periodic => "periodic",
        }
    }
}

/// Status process and reporting mode of every sensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficSpec {
    pub mode: TrafficKind,
    /// Mean occupied plus mean vacant time, split evenly.
    pub mean_cycle: f64,
    pub shape_occupied: f64,
    pub shape_vacant: f64,
    /// Reporting period for periodic mode.
    pub omega: f64,
    pub phase: PhasePolicy,
    pub init: InitPolicy,
}

impl Default for TrafficSpec {
    fn default() -> Self {
        Self {
            mode: TrafficKind::EventDriven,
            mean_cycle: 400.0,
            shape_occupied: 0.5,
            shape_vacant: 0.5,
            omega: 60.0,
            phase: PhasePolicy::Uniform,
            init: InitPolicy::Fresh,
        }
    }
}

/// Parameter grid; the cartesian product is taken in field order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub mac_mode: Vec<MacMode>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub traffic_mode: Vec<TrafficKind>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sensors: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub mean_cycle: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub omega: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub slot: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tpo_dbm: Vec<f64>,
}

impl Sweep {
    pub fn is_empty(&self) -> bool {
        *self == Sweep::default()
    }
}

/// One combination of swept values; `None` keeps the base value.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub mac_mode: Option<MacMode>,
    pub traffic_mode: Option<TrafficKind>,
    pub sensors: Option<usize>,
    pub mean_cycle: Option<f64>,
    pub omega: Option<f64>,
    pub slot: Option<f64>,
    pub tpo_dbm: Option<f64>,
}

impl SweepPoint {
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(v) = self.mac_mode {
            parts.push(format!("mac_mode={}", v.as_str()));
        }
        if let Some(v) = self.traffic_mode {
            parts.push(format!("traffic_mode={}", v.as_str()));
        }
        if let Some(v) = self.sensors {
            parts.push(format!("sensors={v}"));
        }
        for (k, v) in [
            ("mean_cycle", self.mean_cycle),
            ("omega", self.omega),
            ("slot", self.slot),
            ("tpo_dbm", self.tpo_dbm),
        ] {
            if let Some(v) = v {
                parts.push(format!("{k}={v}"));
            }
        }
        if parts.is_empty() {
            "base".into()
        } else {
            parts.join(",")
        }
    }
}

fn default_sim_time() -> f64 {
    86_400.0
}

fn default_batches() -> u32 {
    20
}

fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_sim_time")]
    pub sim_time: f64,
    #[serde(default = "default_batches")]
    pub batches: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub supersede: SupersedePolicy,
    pub topology: TopologySpec,
    #[serde(default)]
    pub mac: DutyCycleConfig,
    #[serde(default)]
    pub radio: RadioParams,
    #[serde(default)]
    pub traffic: TrafficSpec,
    #[serde(default, skip_serializing_if = "Sweep::is_empty")]
    pub sweep: Sweep,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Fully resolved configuration of one sweep point.
#[derive(Clone, Debug)]
pub struct PointConfig {
    pub point: SweepPoint,
    pub config: SimConfig,
}

/// Descriptive columns shared by every result row of a point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointDescriptor {
    pub mac_mode: MacMode,
    pub traffic_mode: TrafficKind,
    pub sensors: usize,
    pub mean_cycle: f64,
    pub omega: f64,
    pub slot: f64,
    pub tpo_dbm: f64,
}

impl Scenario {
    pub fn new(name: &str, topology: TopologySpec) -> Self {
        Self {
            name: name.into(),
            sim_time: default_sim_time(),
            batches: default_batches(),
            seed: default_seed(),
            supersede: SupersedePolicy::default(),
            topology,
            mac: DutyCycleConfig::default(),
            radio: RadioParams::default(),
            traffic: TrafficSpec::default(),
            sweep: Sweep::default(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut s = Self::from_toml(&text)?;
        s.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.sim_time.is_finite() && self.sim_time > 0.0) {
            return Err(field("sim_time", format!("must be > 0, got {}", self.sim_time)));
        }
        if self.batches == 0 {
            return Err(field("batches", "must be >= 1"));
        }
        let t = &self.traffic;
        for (name, v) in [
            ("traffic.mean_cycle", t.mean_cycle),
            ("traffic.shape_occupied", t.shape_occupied),
            ("traffic.shape_vacant", t.shape_vacant),
            ("traffic.omega", t.omega),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(field(name, format!("must be > 0, got {v}")));
            }
        }
        if let TopologySpec::Cross { sensors: 0 } = self.topology {
            return Err(field("topology.sensors", "must be >= 1"));
        }
        let sw = &self.sweep;
        if sw.sensors.contains(&0) {
            return Err(field("sweep.sensors", "values must be >= 1"));
        }
        if !sw.sensors.is_empty() && !matches!(self.topology, TopologySpec::Cross { .. }) {
            return Err(field("sweep.sensors", "only applies to cross topologies"));
        }
        for (name, vals) in [
            ("sweep.mean_cycle", &sw.mean_cycle),
            ("sweep.omega", &sw.omega),
            ("sweep.slot", &sw.slot),
        ] {
            if let Some(v) = vals.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(field(name, format!("values must be > 0, got {v}")));
            }
        }
        if let Some(v) = sw.tpo_dbm.iter().find(|v| !v.is_finite()) {
            return Err(field("sweep.tpo_dbm", format!("values must be finite, got {v}")));
        }
        Ok(())
    }

    /// Every sweep point in expansion order. A scenario without a sweep has
    /// one point.
    pub fn points(&self) -> Vec<SweepPoint> {
        fn axis<T: Copy>(v: &[T]) -> Vec<Option<T>> {
            if v.is_empty() {
                vec![None]
            } else {
                v.iter().copied().map(Some).collect()
            }
        }
        let sw = &self.sweep;
        let mut out = Vec::new();
        for &mac_mode in &axis(&sw.mac_mode) {
            for &traffic_mode in &axis(&sw.traffic_mode) {
                for &sensors in &axis(&sw.sensors) {
                    for &mean_cycle in &axis(&sw.mean_cycle) {
                        for &omega in &axis(&sw.omega) {
                            for &slot in &axis(&sw.slot) {
                                for &tpo_dbm in &axis(&sw.tpo_dbm) {
                                    out.push(SweepPoint {
                                        index: out.len(),
                                        mac_mode,
                                        traffic_mode,
                                        sensors,
                                        mean_cycle,
                                        omega,
                                        slot,
                                        tpo_dbm,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Base scenario with one sweep point applied.
    pub fn with_point(&self, p: &SweepPoint) -> Scenario {
        let mut s = self.clone();
        s.sweep = Sweep::default();
        if let Some(v) = p.mac_mode {
            s.mac.mode = v;
        }
        if let Some(v) = p.traffic_mode {
            s.traffic.mode = v;
        }
        if let (Some(v), TopologySpec::Cross { sensors }) = (p.sensors, &mut s.topology) {
            *sensors = v;
        }
        if let Some(v) = p.mean_cycle {
            s.traffic.mean_cycle = v;
        }
        if let Some(v) = p.omega {
            s.traffic.omega = v;
        }
        if let Some(v) = p.slot {
            s.mac.slot = v;
        }
        if let Some(v) = p.tpo_dbm {
            s.radio.tpo_dbm = v;
        }
        s
    }

    fn description(&self) -> Result<Option<TopologyDescription>, ScenarioError> {
        let text = match &self.topology {
            TopologySpec::Cross { .. } => return Ok(None),
            TopologySpec::ParkingMap => PARKING_MAP.to_string(),
            TopologySpec::File { path } => {
                let full = if path.is_absolute() {
                    path.clone()
                } else {
                    self.base_dir.join(path)
                };
                std::fs::read_to_string(&full).map_err(|source| ScenarioError::Io {
                    path: full.clone(),
                    source,
                })?
            }
        };
        parse_topology_file(&text)
            .map(Some)
            .map_err(|e| field("topology", e.to_string()))
    }

    pub fn descriptor(&self, p: &SweepPoint) -> PointDescriptor {
        let s = self.with_point(p);
        let sensors = match s.topology {
            TopologySpec::Cross { sensors } => sensors,
            _ => s
                .description()
                .ok()
                .flatten()
                .map_or(0, |d| d.sensor_count()),
        };
        PointDescriptor {
            mac_mode: s.mac.mode,
            traffic_mode: s.traffic.mode,
            sensors,
            mean_cycle: s.traffic.mean_cycle,
            omega: s.traffic.omega,
            slot: s.mac.slot,
            tpo_dbm: s.radio.tpo_dbm,
        }
    }

    fn sim_config(&self, desc: Option<&TopologyDescription>) -> Result<SimConfig, SimError> {
        let mut radio = self.radio.clone();
        let topology = match (&self.topology, desc) {
            (TopologySpec::Cross { sensors }, _) => build_cross_topology(*sensors)?,
            (_, Some(d)) => {
                if let Some(ffd) = d.ffd_tpo_dbm() {
                    radio.ffd_tpo_dbm = ffd;
                }
                d.instantiate(radio.tpo_dbm)?
            }
            (_, None) => unreachable!("file topologies always carry a description"),
        };
        let t = &self.traffic;
        let half = t.mean_cycle / 2.0;
        let space = SpaceTraffic {
            occupied: WeibullParams::from_mean(half, t.shape_occupied)?,
            vacant: WeibullParams::from_mean(half, t.shape_vacant)?,
        };
        let mode = match t.mode {
            TrafficKind::EventDriven => TrafficMode::EventDriven,
            TrafficKind::Periodic => TrafficMode::Periodic {
                omega: t.omega,
                phase: t.phase,
            },
        };
        Ok(SimConfig {
            topology,
            mac: self.mac.clone(),
            radio,
            traffic: TrafficConfig {
                mode,
                space,
                init: t.init,
            },
            sim_time: self.sim_time,
            supersede: self.supersede,
            trace: false,
        })
    }

    /// Resolves and validates every sweep point before anything runs.
    pub fn prepare(&self) -> Result<Vec<(SweepPoint, Prepared)>, ScenarioError> {
        self.points()
            .into_iter()
            .map(|p| {
                let s = self.with_point(&p);
                let desc = s.description()?;
                let prep = s
                    .sim_config(desc.as_ref())
                    .and_then(Prepared::new)
                    .map_err(|source| ScenarioError::Point {
                        index: p.index,
                        label: p.label(),
                        source,
                    })?;
                Ok((p, prep))
            })
            .collect()
    }
}

/// Runs every prepared point for `batches` batches.
pub fn run_points(
    scenario: &Scenario,
    prepared: &[(SweepPoint, Prepared)],
    seed: u64,
    batches: u32,
    parallel: usize,
) -> Result<Vec<PointResult>, ScenarioError> {
    prepared
        .iter()
        .map(|(p, prep)| {
            let results =
                run_batches(prep, batches, seed, parallel).map_err(|source| ScenarioError::Point {
                    index: p.index,
                    label: p.label(),
                    source,
                })?;
            Ok(PointResult {
                point: p.clone(),
                descriptor: scenario.descriptor(p),
                results,
            })
        })
        .collect()
}
