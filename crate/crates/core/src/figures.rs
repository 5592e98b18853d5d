//! Catalog of reproducible figures. Each figure is a set of scenarios whose
//! outputs the plotting stage turns into charts.

use serde::Serialize;

use crate::mac::MacMode;
use crate::scenario::{Scenario, Sweep, TopologySpec, TrafficKind};

#[derive(Clone, Debug, Serialize)]
pub struct Figure {
    pub id: &'static str,
    pub title: &'static str,
    /// Column on the horizontal axis.
    pub x: &'static str,
    /// Aggregate columns on the vertical axis, one chart each.
    pub y: &'static [&'static str],
    /// Descriptor column that separates series within a chart.
    pub series: &'static str,
}

pub const FIGURES: &[Figure] = &[
    Figure {
        id: "energy-vs-N",
        title: "Sensor energy per day against cell size",
        x: "sensors",
        y: &["sensor_energy_mean_j"],
        series: "traffic_mode",
    },
    Figure {
        id: "delay-vs-N",
        title: "Mean update delay against cell size",
        x: "sensors",
        y: &["mean_delay_s"],
        series: "mac_mode",
    },
    Figure {
        id: "energy-vs-omega",
        title: "Sensor energy per day against reporting period",
        x: "omega",
        y: &["sensor_energy_mean_j"],
        series: "mac_mode",
    },
    Figure {
        id: "delay-vs-load",
        title: "Mean update delay against mean parking cycle",
        x: "mean_cycle",
        y: &["mean_delay_s", "p1"],
        series: "mac_mode",
    },
    Figure {
        id: "energy-delay-tradeoff",
        title: "Energy against delay while varying the slot length",
        x: "mean_delay_s",
        y: &["sensor_energy_mean_j"],
        series: "mac_mode",
    },
    Figure {
        id: "parking-map-load",
        title: "Delivery ratio and router load on the parking map against sensor power",
        x: "tpo_dbm",
        y: &["pdr", "router_load_ratio"],
        series: "mac_mode",
    },
];

pub fn find(id: &str) -> Option<&'static Figure> {
    let id = if id == "energy-vs-\u{3c9}" { "energy-vs-omega" } else { id };
    FIGURES.iter().find(|f| f.id == id)
}

pub fn catalog_text() -> String {
    FIGURES
        .iter()
        .map(|f| format!("{:<24}{}\n", f.id, f.title))
        .collect()
}

const CELL_SIZES: [usize; 4] = [12, 24, 48, 96];
const BOTH_MACS: [MacMode; 2] = [MacMode::Schedule, MacMode::Contention];

fn cross(name: &str, sensors: usize) -> Scenario {
    Scenario::new(name, TopologySpec::Cross { sensors })
}

impl Figure {
    /// Scenarios to run for this figure.
    pub fn scenarios(&self) -> Vec<Scenario> {
        match self.id {
            "energy-vs-N" => BOTH_MACS
                .iter()
                .map(|&mode| {
                    let mut s = cross(&format!("energy-vs-N-{}", mode.as_str()), 24);
                    s.mac.mode = mode;
                    s.traffic.mean_cycle = 320.0;
                    s.sweep = Sweep {
                        traffic_mode: vec![TrafficKind::EventDriven, TrafficKind::Periodic],
                        sensors: CELL_SIZES.to_vec(),
                        ..Sweep::default()
                    };
                    s
                })
                .collect(),
            "delay-vs-N" => {
                let mut s = cross("delay-vs-N", 24);
                s.traffic.mean_cycle = 320.0;
                s.sweep = Sweep {
                    mac_mode: BOTH_MACS.to_vec(),
                    sensors: CELL_SIZES.to_vec(),
                    ..Sweep::default()
                };
                vec![s]
            }
            "energy-vs-omega" => {
                let mut s = cross("energy-vs-omega", 24);
                s.traffic.mode = TrafficKind::Periodic;
                s.sweep = Sweep {
                    mac_mode: BOTH_MACS.to_vec(),
                    omega: vec![60.0, 120.0, 300.0, 600.0, 1200.0],
                    ..Sweep::default()
                };
                vec![s]
            }
            "delay-vs-load" => {
                let mut s = cross("delay-vs-load", 24);
                s.sweep = Sweep {
                    mac_mode: BOTH_MACS.to_vec(),
                    mean_cycle: vec![4800.0, 2400.0, 1200.0, 640.0, 320.0],
                    ..Sweep::default()
                };
                vec![s]
            }
            "energy-delay-tradeoff" => {
                let mut s = cross("energy-delay-tradeoff", 24);
                s.traffic.mean_cycle = 160.0;
                s.sweep = Sweep {
                    mac_mode: BOTH_MACS.to_vec(),
                    slot: vec![0.1, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2],
                    ..Sweep::default()
                };
                vec![s]
            }
            "parking-map-load" => {
                let mut s = Scenario::new("parking-map-load", TopologySpec::ParkingMap);
                s.sweep = Sweep {
                    mac_mode: BOTH_MACS.to_vec(),
                    tpo_dbm: vec![3.0, 0.0, -3.0, -7.0],
                    ..Sweep::default()
                };
                vec![s]
            }
            _ => Vec::new(),
        }
    }
}
