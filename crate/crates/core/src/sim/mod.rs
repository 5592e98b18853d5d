//! Network simulation: traffic, MAC slots, routing and metric collection.

mod slot;
mod world;

use std::collections::BTreeMap;

use rayon::prelude::*;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EngineError, NodeId};
use crate::mac::{AttemptOutcome, DutyCycleConfig, ExchangeTiming, MacError, MacMode};
use crate::metrics::{
    estimate_cycle_probabilities, summarize, CycleHistogram, DelaySample, Summary,
    SupersedePolicy,
};
use crate::network::{
    cells, compute_gradients, GradientTable, LinkTable, NetworkError, Role, Topology,
};
use crate::radio::{RadioError, RadioParams};
use crate::traffic::{InitPolicy, SpaceTraffic, TrafficError, TrafficMode};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Mac(#[from] MacError),
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrafficConfig {
    pub mode: TrafficMode,
    pub space: SpaceTraffic,
    pub init: InitPolicy,
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub topology: Topology,
    pub mac: DutyCycleConfig,
    pub radio: RadioParams,
    pub traffic: TrafficConfig,
    pub sim_time: f64,
    pub supersede: SupersedePolicy,
    /// Keep a record of every MAC attempt.
    pub trace: bool,
}

impl SimConfig {
    /// Defaults for everything except the topology.
    pub fn new(topology: Topology, traffic: TrafficConfig) -> Self {
        Self {
            topology,
            mac: DutyCycleConfig::default(),
            radio: RadioParams::default(),
            traffic,
            sim_time: 86_400.0,
            supersede: SupersedePolicy::default(),
            trace: false,
        }
    }
}

/// Timing of the slots in which a node may send.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SendSchedule {
    pub cycle: f64,
    pub offset: f64,
}

/// Static, batch independent part of a configuration.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: SimConfig,
    pub links: LinkTable,
    pub routes: GradientTable,
    pub schedules: Vec<Option<SendSchedule>>,
    pub exchange: ExchangeTiming,
}

impl Prepared {
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        if !(config.sim_time.is_finite() && config.sim_time > 0.0) {
            return Err(SimError::Config(format!(
                "sim_time must be > 0, got {}",
                config.sim_time
            )));
        }
        config.radio.validate()?;
        let data = config.radio.data_airtime();
        config.mac.validate(data)?;
        if let TrafficMode::Periodic { omega, .. } = config.traffic.mode {
            if !(omega.is_finite() && omega > 0.0) {
                return Err(SimError::Config(format!("omega must be > 0, got {omega}")));
            }
        }
        let topo = &config.topology;
        let links = topo.link_table(&config.radio);
        let routes = compute_gradients(topo, &links, &config.radio)?;
        let mac = &config.mac;
        let mut schedules = vec![None; topo.len()];
        match mac.mode {
            MacMode::Contention => {
                let cycle = mac.slot + mac.inactive;
                for n in topo.nodes() {
                    if routes.parent[n.id.index()].is_some() {
                        schedules[n.id.index()] = Some(SendSchedule { cycle, offset: 0.0 });
                    }
                }
            }
            MacMode::Schedule => {
                let layouts = cells(topo, &routes);
                if layouts.len() > 1 {
                    let ratio = mac.inactive / mac.slot;
                    if (ratio - ratio.round()).abs() > 1e-9 {
                        return Err(SimError::Config(
                            "multi-cell schedule mode needs inactive to be a whole number of slots"
                                .into(),
                        ));
                    }
                }
                for cell in &layouts {
                    let cycle = mac.slot * cell.slots() as f64 + mac.inactive;
                    for &m in &cell.members {
                        let s = cell.slot_of(m)?;
                        schedules[m.index()] = Some(SendSchedule {
                            cycle,
                            offset: s as f64 * mac.slot,
                        });
                    }
                }
            }
        }
        let exchange = mac.exchange(data);
        Ok(Self {
            config,
            links,
            routes,
            schedules,
            exchange,
        })
    }

    /// Duty cycle length seen by sensor traffic (the first sensor's cell).
    pub fn sensor_cycle(&self) -> f64 {
        self.config
            .topology
            .sensors()
            .find_map(|s| self.schedules[s.id.index()])
            .map(|s| s.cycle)
            .unwrap_or(self.config.mac.slot + self.config.mac.inactive)
    }

    pub fn run(&self, seed: u64, batch: u32) -> Result<RunMetrics, SimError> {
        world::World::new(self, seed, batch).run()
    }
}

/// Convenience: prepare and run one batch.
pub fn simulate(config: &SimConfig, seed: u64, batch: u32) -> Result<RunMetrics, SimError> {
    Prepared::new(config.clone())?.run(seed, batch)
}

/// Relay counters of one repeater.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouterStats {
    /// Distinct packets accepted for forwarding.
    pub received: u64,
    /// Packets handed to the next hop.
    pub forwarded: u64,
    pub dropped: u64,
    pub queued: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub node: NodeId,
    pub slot_start: f64,
    pub start: f64,
    pub outcome: AttemptOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeEnergy {
    pub node: NodeId,
    pub role: Role,
    pub joules: f64,
    pub tx_s: f64,
    pub rx_s: f64,
    pub cs_s: f64,
    pub off_s: f64,
    pub switches: u64,
}

/// Everything measured in one batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub batch: u32,
    pub sim_time: f64,
    pub cycle_length: f64,
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    /// Periodic reports overwritten before they were sent.
    pub missed: u64,
    pub queued_at_end: u64,
    pub mac_attempts: u64,
    pub collisions: u64,
    pub deferrals: u64,
    pub histogram: CycleHistogram,
    pub delays: Vec<DelaySample>,
    pub energy: Vec<NodeEnergy>,
    pub router_load: BTreeMap<NodeId, u64>,
    pub routers: BTreeMap<NodeId, RouterStats>,
    pub attempts: Vec<AttemptRecord>,
    pub generated_per_node: Vec<u64>,
    pub events: u64,
}

impl RunMetrics {
    pub fn pdr(&self) -> f64 {
        if self.generated == 0 {
            1.0
        } else {
            self.delivered as f64 / self.generated as f64
        }
    }

    pub fn mean_delay(&self) -> f64 {
        let d: Vec<f64> = self.delays.iter().filter_map(|s| s.delay).collect();
        summarize(&d).mean
    }

    /// Mean delay of changes delivered by their own packet.
    pub fn mean_direct_delay(&self) -> f64 {
        let d: Vec<f64> = self
            .delays
            .iter()
            .filter(|s| !s.superseded)
            .filter_map(|s| s.delay)
            .collect();
        summarize(&d).mean
    }

    pub fn superseded(&self) -> usize {
        self.delays.iter().filter(|s| s.superseded).count()
    }

    pub fn censored(&self) -> usize {
        self.delays.iter().filter(|s| s.censored).count()
    }

    pub fn cycle_probabilities(&self) -> Vec<f64> {
        estimate_cycle_probabilities(&self.histogram).unwrap_or_default()
    }

    pub fn sensor_energy(&self) -> Vec<f64> {
        self.energy
            .iter()
            .filter(|e| e.role == Role::Sensor)
            .map(|e| e.joules)
            .collect()
    }

    /// Named scalar metrics in a fixed order.
    pub fn scalars(&self) -> Vec<(&'static str, f64)> {
        let p = self.cycle_probabilities();
        let e = summarize(&self.sensor_energy());
        vec![
            ("generated", self.generated as f64),
            ("delivered", self.delivered as f64),
            ("dropped", self.dropped as f64),
            ("missed", self.missed as f64),
            ("queued_at_end", self.queued_at_end as f64),
            ("pdr", self.pdr()),
            ("mean_delay_s", self.mean_delay()),
            ("censored", self.censored() as f64),
            ("superseded", self.superseded() as f64),
            ("p1", p.first().copied().unwrap_or(f64::NAN)),
            ("p2", p.get(1).copied().unwrap_or(1.0)),
            ("cycle_s", self.cycle_length),
            ("sensor_energy_mean_j", e.mean),
            ("sensor_energy_std_j", e.std),
            ("mac_attempts", self.mac_attempts as f64),
            ("collisions", self.collisions as f64),
            ("deferrals", self.deferrals as f64),
            ("router_load_ratio", self.router_load_ratio().unwrap_or(f64::NAN)),
        ]
    }

    /// Forwarded packets per repeater: maximum over mean.
    pub fn router_load_ratio(&self) -> Option<f64> {
        let loads: Vec<f64> = self.router_load.values().map(|&v| v as f64).collect();
        let s = summarize(&loads);
        let max = loads.iter().copied().fold(0.0, f64::max);
        (s.n > 0 && s.mean > 0.0).then(|| max / s.mean)
    }
}

/// Per-batch results of one configuration plus mean/std per scalar metric.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchResults {
    pub runs: Vec<RunMetrics>,
    pub aggregate: Vec<(&'static str, Summary)>,
}

impl BatchResults {
    pub fn summary(&self, name: &str) -> Option<Summary> {
        self.aggregate.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
    }

    /// One scalar across batches.
    pub fn values(&self, name: &str) -> Vec<f64> {
        self.runs
            .iter()
            .map(|r| {
                r.scalars()
                    .into_iter()
                    .find(|(n, _)| *n == name)
                    .map_or(f64::NAN, |(_, v)| v)
            })
            .collect()
    }
}

/// Runs batches `0..batches`, each on its own substreams of `base_seed`.
/// `parallel` is the worker count; 0 or 1 runs sequentially.
pub fn run_batches(
    prep: &Prepared,
    batches: u32,
    base_seed: u64,
    parallel: usize,
) -> Result<BatchResults, SimError> {
    if batches == 0 {
        return Err(SimError::Config("batches must be >= 1".into()));
    }
    let runs: Vec<RunMetrics> = if parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .map_err(|e| SimError::Config(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..batches)
                .into_par_iter()
                .map(|b| prep.run(base_seed, b))
                .collect::<Result<_, _>>()
        })?
    } else {
        (0..batches)
            .map(|b| prep.run(base_seed, b))
            .collect::<Result<_, _>>()?
    };
    Ok(BatchResults {
        aggregate: aggregate(&runs),
        runs,
    })
}

pub fn aggregate(runs: &[RunMetrics]) -> Vec<(&'static str, Summary)> {
    let per_run: Vec<Vec<(&'static str, f64)>> = runs.iter().map(RunMetrics::scalars).collect();
    let Some(first) = per_run.first() else {
        return Vec::new();
    };
    first
        .iter()
        .enumerate()
        .map(|(i, (name, _))| {
            let xs: Vec<f64> = per_run.iter().map(|r| r[i].1).filter(|v| !v.is_nan()).collect();
            (*name, summarize(&xs))
        })
        .collect()
}
