use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{AttemptRecord, NodeEnergy, Prepared, RouterStats, RunMetrics, SendSchedule, SimError};
use crate::engine::{Engine, EventKind, NodeId, SimEvent};
use crate::mac::{next_cycle_time, EnqueueOutcome, Packet, QueuePolicy, TxQueue};
use crate::metrics::{cycle_index, CycleHistogram, DelayTracker};
use crate::network::{count_router_load, Role};
use crate::traffic::OccupancyStatus;
use crate::radio::{EnergyLedger, RadioState};
use crate::rng::{stream, Purpose, StreamId};
use crate::traffic::{ParkingProcess, PhasePolicy, TrafficMode};

#[derive(Clone, Copy, Debug, PartialEq)]
pub(super) enum Ev {
    Toggle,
    Report,
    Slot(i64),
}

pub(super) struct NodeState {
    pub role: Role,
    pub parent: Option<NodeId>,
    pub schedule: Option<SendSchedule>,
    pub queue: TxQueue,
    pub cw: u32,
    pub ledger: EnergyLedger,
    pub ledger_until: f64,
    pub process: Option<ParkingProcess>,
    pub traffic_rng: ChaCha8Rng,
    pub backoff_rng: ChaCha8Rng,
    pub fade_rng: ChaCha8Rng,
    pub next_seq: u64,
    pub registered: bool,
    pub seen: HashSet<(NodeId, u64)>,
    pub relay: RouterStats,
    pub generated: u64,
}

/// Tolerance for matching slot grid times, far below any frame duration.
const GRID_EPS: f64 = 1e-6;

pub(super) struct World<'a> {
    pub prep: &'a Prepared,
    pub seed: u64,
    pub batch: u32,
    pub nodes: Vec<NodeState>,
    pub slots: BTreeMap<i64, Vec<NodeId>>,
    pub tracker: DelayTracker,
    pub histogram: CycleHistogram,
    pub gateway_seen: HashSet<(NodeId, u64)>,
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub missed: u64,
    pub mac_attempts: u64,
    pub collisions: u64,
    pub deferrals: u64,
    pub attempts: Vec<AttemptRecord>,
}

fn slot_key(t: f64) -> i64 {
    (t * 1e9).round() as i64
}

impl<'a> World<'a> {
    pub fn new(prep: &'a Prepared, seed: u64, batch: u32) -> Self {
        let cfg = &prep.config;
        let topo = &cfg.topology;
        let nodes = topo
            .nodes()
            .iter()
            .map(|n| {
                let s = |p| stream(seed, StreamId::new(batch, n.id, p));
                let ffd = n.role.is_ffd();
                NodeState {
                    role: n.role,
                    parent: prep.routes.parent[n.id.index()],
                    schedule: prep.schedules[n.id.index()],
                    queue: TxQueue::new(if ffd {
                        cfg.mac.router_queue_capacity
                    } else {
                        cfg.mac.sensor_queue_capacity
                    }),
                    cw: cfg.mac.cw_min,
                    ledger: EnergyLedger::new(if ffd {
                        RadioState::CarrierSense
                    } else {
                        RadioState::Off
                    }),
                    ledger_until: 0.0,
                    process: None,
                    traffic_rng: s(Purpose::Traffic),
                    backoff_rng: s(Purpose::Backoff),
                    fade_rng: s(Purpose::Fading),
                    next_seq: 0,
                    registered: false,
                    seen: HashSet::new(),
                    relay: RouterStats::default(),
                    generated: 0,
                }
            })
            .collect();
        Self {
            prep,
            seed,
            batch,
            nodes,
            slots: BTreeMap::new(),
            tracker: DelayTracker::new(topo.len(), cfg.supersede),
            histogram: CycleHistogram::default(),
            gateway_seen: HashSet::new(),
            generated: 0,
            delivered: 0,
            dropped: 0,
            missed: 0,
            mac_attempts: 0,
            collisions: 0,
            deferrals: 0,
            attempts: Vec::new(),
        }
    }

    pub fn run(mut self) -> Result<RunMetrics, SimError> {
        let mut engine: Engine<Ev> = Engine::new();
        self.start_traffic(&mut engine)?;
        let mut failure = None;
        engine.run_until(self.prep.config.sim_time, |eng, ev| {
            if failure.is_none() {
                if let Err(e) = self.handle(eng, ev) {
                    failure = Some(e);
                }
            }
        })?;
        match failure {
            Some(e) => Err(e),
            None => Ok(self.finish(engine.processed())),
        }
    }

    fn aux_stream(&self, id: NodeId, purpose: Purpose) -> ChaCha8Rng {
        stream(self.seed, StreamId::new(self.batch, id, purpose))
    }

    fn start_traffic(&mut self, engine: &mut Engine<Ev>) -> Result<(), SimError> {
        let traffic = self.prep.config.traffic.clone();
        for i in 0..self.nodes.len() {
            if self.nodes[i].role != Role::Sensor {
                continue;
            }
            let id = NodeId(i as u32);
            let mut status_rng = self.aux_stream(id, Purpose::InitialStatus);
            let node = &mut self.nodes[i];
            let process = ParkingProcess::initialize(
                traffic.space,
                traffic.init,
                &mut status_rng,
                &mut node.traffic_rng,
            );
            engine.schedule(SimEvent::new(
                process.next_toggle_at(),
                id,
                EventKind::StatusToggle,
                Ev::Toggle,
            ))?;
            node.process = Some(process);
            if let TrafficMode::Periodic { omega, phase } = traffic.mode {
                let first = match phase {
                    PhasePolicy::Uniform => {
                        self.aux_stream(id, Purpose::Phase).random::<f64>() * omega
                    }
                    PhasePolicy::Aligned => 0.0,
                };
                engine.schedule(SimEvent::new(first, id, EventKind::AppTimer, Ev::Report))?;
            }
        }
        Ok(())
    }

    fn handle(&mut self, engine: &mut Engine<Ev>, ev: SimEvent<Ev>) -> Result<(), SimError> {
        let now = ev.fire_at;
        let id = ev.target;
        match ev.payload {
            Ev::Toggle => {
                let node = &mut self.nodes[id.index()];
                let process = node.process.as_mut().expect("sensors carry a process");
                let (status, next) = process.next_transition(now, &mut node.traffic_rng)?;
                engine.schedule(SimEvent::new(next, id, EventKind::StatusToggle, Ev::Toggle))?;
                self.tracker.record_status_change(id, now);
                if self.prep.config.traffic.mode == TrafficMode::EventDriven {
                    self.generate(id, status, now, now, QueuePolicy::Append, engine)?;
                }
            }
            Ev::Report => {
                let TrafficMode::Periodic { omega, .. } = self.prep.config.traffic.mode else {
                    unreachable!("reports only exist in periodic mode");
                };
                let process = self.nodes[id.index()]
                    .process
                    .as_ref()
                    .expect("sensors carry a process");
                let (status, since) = (process.status(), process.status_since());
                self.generate(id, status, since, now, QueuePolicy::ReplaceStale, engine)?;
                engine.schedule(SimEvent::new(now + omega, id, EventKind::AppTimer, Ev::Report))?;
            }
            Ev::Slot(key) => {
                let members = self.slots.remove(&key).unwrap_or_default();
                for &m in &members {
                    self.nodes[m.index()].registered = false;
                }
                let senders: Vec<NodeId> = members
                    .into_iter()
                    .filter(|m| !self.nodes[m.index()].queue.is_empty())
                    .collect();
                self.resolve_slot(now, &senders, engine)?;
                for s in senders {
                    self.register(s, now, engine)?;
                }
            }
        }
        Ok(())
    }

    fn generate(
        &mut self,
        id: NodeId,
        status: OccupancyStatus,
        status_changed_at: f64,
        now: f64,
        policy: QueuePolicy,
        engine: &mut Engine<Ev>,
    ) -> Result<(), SimError> {
        let node = &mut self.nodes[id.index()];
        let packet = Packet {
            source: id,
            seq: node.next_seq,
            status,
            status_changed_at,
            created_at: now,
            retries: 0,
        };
        node.next_seq += 1;
        node.generated += 1;
        self.generated += 1;
        match node.queue.enqueue(packet, policy) {
            EnqueueOutcome::Queued => {}
            EnqueueOutcome::Replaced(_) => self.missed += 1,
            EnqueueOutcome::Overflow(_) => {
                self.dropped += 1;
                self.histogram.record_drop();
            }
        }
        self.register(id, now, engine)
    }

    /// Books the node into its next sending slot if it has something to send.
    pub(super) fn register(
        &mut self,
        id: NodeId,
        now: f64,
        engine: &mut Engine<Ev>,
    ) -> Result<(), SimError> {
        let node = &mut self.nodes[id.index()];
        if node.registered || node.queue.is_empty() {
            return Ok(());
        }
        let Some(sched) = node.schedule else {
            return Ok(());
        };
        // grid times carry rounding noise; a slot at `now` is never rebooked
        let (_, t) = next_cycle_time(sched.offset, sched.cycle, now + GRID_EPS);
        let cfg = &self.prep.config;
        // slots that cannot finish before the horizon are never opened
        if t + cfg.mac.slot > cfg.sim_time {
            return Ok(());
        }
        node.registered = true;
        let key = slot_key(t);
        match self.slots.get_mut(&key) {
            Some(list) => list.push(id),
            None => {
                self.slots.insert(key, vec![id]);
                engine.schedule(SimEvent::new(t, id, EventKind::SlotBegin, Ev::Slot(key)))?;
            }
        }
        Ok(())
    }

    /// Data frame decoded by `receiver` at `now`.
    pub(super) fn deliver(
        &mut self,
        receiver: NodeId,
        packet: Packet,
        now: f64,
        engine: &mut Engine<Ev>,
    ) -> Result<(), SimError> {
        let key = (packet.source, packet.seq);
        if receiver == self.prep.config.topology.gateway() {
            if self.gateway_seen.insert(key) {
                self.delivered += 1;
                let cycle = self.nodes[packet.source.index()]
                    .schedule
                    .map(|s| s.cycle)
                    .unwrap_or(f64::INFINITY);
                self.histogram
                    .record_delivery(cycle_index(now - packet.created_at, cycle));
                self.tracker.record_gateway_reception(
                    packet.source,
                    packet.status_changed_at,
                    now,
                    cycle,
                );
            }
            return Ok(());
        }
        let node = &mut self.nodes[receiver.index()];
        if !node.seen.insert(key) {
            return Ok(());
        }
        node.relay.received += 1;
        let copy = Packet {
            retries: 0,
            ..packet
        };
        match node.queue.enqueue(copy, QueuePolicy::Append) {
            EnqueueOutcome::Overflow(_) => {
                node.relay.dropped += 1;
                self.dropped += 1;
                self.histogram.record_drop();
                Ok(())
            }
            _ => self.register(receiver, now, engine),
        }
    }

    /// Whether `receiver` already holds a copy of the packet.
    pub(super) fn handed_over(&self, receiver: NodeId, packet: &Packet) -> bool {
        let key = (packet.source, packet.seq);
        if receiver == self.prep.config.topology.gateway() {
            self.gateway_seen.contains(&key)
        } else {
            self.nodes[receiver.index()].seen.contains(&key)
        }
    }

    fn finish(mut self, events: u64) -> RunMetrics {
        let cfg = &self.prep.config;
        let sim_time = cfg.sim_time;
        let mut queued_at_end = 0;
        for node in &mut self.nodes {
            node.relay.queued = node.queue.len() as u64;
            if node.role.is_ffd() {
                let busy = node.ledger.tx_s + node.ledger.rx_s;
                node.ledger.cs_s = (sim_time - busy).max(0.0);
            } else {
                let rest = (sim_time - node.ledger_until).max(0.0);
                node.ledger
                    .accrue(RadioState::Off, rest)
                    .expect("non-negative duration");
                node.ledger_until = node.ledger_until.max(sim_time);
            }
            queued_at_end += node
                .queue
                .iter()
                .filter(|p| !self.gateway_seen.contains(&(p.source, p.seq)))
                .count() as u64;
        }
        self.tracker.finish();
        let mut delays = self.tracker.into_samples();
        delays.sort_by(|a, b| {
            a.sensor
                .cmp(&b.sensor)
                .then(a.status_changed_at.total_cmp(&b.status_changed_at))
        });
        let energy = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| NodeEnergy {
                node: NodeId(i as u32),
                role: n.role,
                joules: n.ledger.joules(&cfg.radio),
                tx_s: n.ledger.tx_s,
                rx_s: n.ledger.rx_s,
                cs_s: n.ledger.cs_s,
                off_s: n.ledger.off_s,
                switches: n.ledger.switches,
            })
            .collect();
        let router_load = count_router_load(
            &cfg.topology,
            self.nodes
                .iter()
                .enumerate()
                .flat_map(|(i, n)| std::iter::repeat_n(NodeId(i as u32), n.relay.forwarded as usize)),
        );
        let routers = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.role == Role::Repeater)
            .map(|(i, n)| (NodeId(i as u32), n.relay))
            .collect();
        RunMetrics {
            batch: self.batch,
            sim_time,
            cycle_length: self.prep.sensor_cycle(),
            generated: self.generated,
            delivered: self.delivered,
            dropped: self.dropped,
            missed: self.missed,
            queued_at_end,
            mac_attempts: self.mac_attempts,
            collisions: self.collisions,
            deferrals: self.deferrals,
            histogram: self.histogram,
            delays,
            energy,
            router_load,
            routers,
            attempts: self.attempts,
            generated_per_node: self.nodes.iter().map(|n| n.generated).collect(),
            events,
        }
    }
}
