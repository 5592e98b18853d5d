use serde::{Deserialize, Serialize};

use super::{NetworkError, Node, Point, Role, Street, Topology};
use crate::engine::NodeId;

/// Built-in urban parking deployment.
pub const PARKING_MAP: &str = include_str!("../../data/parking_map.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStreet {
    from: [f64; 2],
    to: [f64; 2],
    #[serde(default)]
    half_width: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGateway {
    position: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRepeater {
    position: [f64; 2],
    tier: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensor {
    position: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensorRun {
    start: [f64; 2],
    step: [f64; 2],
    count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TierRule {
    min_tpo_dbm: f64,
    tiers: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    #[serde(default)]
    ffd_tpo_dbm: Option<f64>,
    #[serde(default = "default_half_width")]
    street_half_width: f64,
    #[serde(default)]
    street: Vec<RawStreet>,
    gateway: RawGateway,
    #[serde(default)]
    repeater: Vec<RawRepeater>,
    #[serde(default)]
    sensor: Vec<RawSensor>,
    #[serde(default)]
    sensor_run: Vec<RawSensorRun>,
    #[serde(default)]
    tier_rule: Vec<TierRule>,
}

fn default_half_width() -> f64 {
    8.0
}

fn pt(p: [f64; 2]) -> Point {
    Point::new(p[0], p[1])
}

/// Parsed deployment file. Repeaters are grouped in tiers that are switched on
/// according to the sensor transmit power.
#[derive(Clone, Debug, PartialEq)]
pub struct TopologyDescription {
    ffd_tpo_dbm: Option<f64>,
    streets: Vec<Street>,
    gateway: Point,
    sensors: Vec<Point>,
    repeaters: Vec<(Point, String)>,
    rules: Vec<TierRule>,
}

pub fn parse_topology_file(text: &str) -> Result<TopologyDescription, NetworkError> {
    let raw: RawMap = toml::from_str(text).map_err(|e| NetworkError::Parse(e.to_string()))?;
    let streets = raw
        .street
        .iter()
        .map(|s| Street::new(pt(s.from), pt(s.to), s.half_width.unwrap_or(raw.street_half_width)))
        .collect();
    let mut sensors: Vec<Point> = raw.sensor.iter().map(|s| pt(s.position)).collect();
    for run in &raw.sensor_run {
        for i in 0..run.count {
            let f = i as f64;
            sensors.push(Point::new(
                run.start[0] + f * run.step[0],
                run.start[1] + f * run.step[1],
            ));
        }
    }
    if sensors.is_empty() {
        return Err(NetworkError::Parse("no sensors".into()));
    }
    let mut rules = raw.tier_rule;
    for r in &rules {
        if !r.min_tpo_dbm.is_finite() {
            return Err(NetworkError::Parse("tier rule with non-finite power".into()));
        }
        for t in &r.tiers {
            if !raw.repeater.iter().any(|rep| &rep.tier == t) {
                return Err(NetworkError::Parse(format!("tier {t:?} has no repeaters")));
            }
        }
    }
    rules.sort_by(|a, b| b.min_tpo_dbm.total_cmp(&a.min_tpo_dbm));
    Ok(TopologyDescription {
        ffd_tpo_dbm: raw.ffd_tpo_dbm,
        streets,
        gateway: pt(raw.gateway.position),
        sensors,
        repeaters: raw.repeater.iter().map(|r| (pt(r.position), r.tier.clone())).collect(),
        rules,
    })
}

impl TopologyDescription {
    /// Transmit power the file prescribes for repeaters and the gateway.
    pub fn ffd_tpo_dbm(&self) -> Option<f64> {
        self.ffd_tpo_dbm
    }

    pub fn sensor_count(&self) -> usize {
        self.sensors.len()
    }

    /// Lowest transmit power any tier rule supports; `None` if the file has
    /// no rules and therefore supports every power with all repeaters on.
    pub fn min_supported_tpo(&self) -> Option<f64> {
        self.rules.last().map(|r| r.min_tpo_dbm)
    }

    fn active_tiers(&self, tpo_dbm: f64) -> Result<Option<&[String]>, NetworkError> {
        if self.rules.is_empty() {
            return Ok(None);
        }
        self.rules
            .iter()
            .find(|r| tpo_dbm >= r.min_tpo_dbm)
            .map(|r| Some(r.tiers.as_slice()))
            .ok_or(NetworkError::UnsupportedTpo(tpo_dbm))
    }

    /// Node set for a given sensor transmit power. Ids: gateway 0, sensors
    /// next (stable across powers), then the active repeaters.
    pub fn instantiate(&self, tpo_dbm: f64) -> Result<Topology, NetworkError> {
        if !tpo_dbm.is_finite() {
            return Err(NetworkError::UnsupportedTpo(tpo_dbm));
        }
        let tiers = self.active_tiers(tpo_dbm)?;
        let mut nodes = vec![Node {
            id: NodeId(0),
            role: Role::Gateway,
            position: self.gateway,
            tier: None,
        }];
        for &p in &self.sensors {
            nodes.push(Node {
                id: NodeId(nodes.len() as u32),
                role: Role::Sensor,
                position: p,
                tier: None,
            });
        }
        for (p, tier) in &self.repeaters {
            if tiers.is_none_or(|ts| ts.contains(tier)) {
                nodes.push(Node {
                    id: NodeId(nodes.len() as u32),
                    role: Role::Repeater,
                    position: *p,
                    tier: Some(tier.clone()),
                });
            }
        }
        Topology::new(nodes, self.streets.clone())
    }
}

/// Built-in parking deployment at the given sensor transmit power.
pub fn build_parking_map(tpo_dbm: f64) -> Result<Topology, NetworkError> {
    parse_topology_file(PARKING_MAP)?.instantiate(tpo_dbm)
}
