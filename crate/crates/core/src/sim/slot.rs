//! Frame-level resolution of the exchanges that start in one slot.

use std::collections::{HashMap, HashSet};

use super::world::{Ev, World};
use super::{AttemptRecord, SimError};
use crate::engine::{Engine, NodeId};
use crate::mac::{backoff_window_update, contention_draw, AttemptOutcome, MacMode, Packet};
use crate::radio::{rayleigh_fade_db, resolve_reception, LinkOutcome, RadioState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    Beacon,
    Grant,
    Data,
    Ack,
}

struct Frame {
    tx: NodeId,
    dst: NodeId,
    start: f64,
    end: f64,
    ex: usize,
    stage: Stage,
}

impl Frame {
    fn overlaps(&self, o: &Frame) -> bool {
        self.start < o.end && o.start < self.end
    }
}

struct Exchange {
    sender: NodeId,
    receiver: NodeId,
    packet: Packet,
    start: f64,
    grant_ok: bool,
    ack_ok: bool,
    outcome: Option<AttemptOutcome>,
    deferred_on: Option<usize>,
}

#[derive(Clone, Copy)]
enum Act {
    End(usize),
    Expire(usize),
    Start(usize, Stage),
}

impl Act {
    fn priority(self) -> u8 {
        match self {
            Act::End(_) => 0,
            Act::Expire(_) => 1,
            Act::Start(..) => 2,
        }
    }
}

struct Agenda {
    items: Vec<(f64, u8, u64, Act)>,
    seq: u64,
}

impl Agenda {
    fn push(&mut self, t: f64, act: Act) {
        self.items.push((t, act.priority(), self.seq, act));
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<(f64, Act)> {
        let i = (0..self.items.len()).min_by(|&a, &b| {
            let (x, y) = (&self.items[a], &self.items[b]);
            x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2))
        })?;
        let (t, _, _, act) = self.items.swap_remove(i);
        Some((t, act))
    }
}

impl World<'_> {
    fn faded(
        &mut self,
        frames: &[Frame],
        fades: &mut HashMap<(usize, NodeId), f64>,
        f: usize,
        at: NodeId,
    ) -> (f64, f64) {
        let tx = frames[f].tx;
        let mean = self.prep.links.mean_dbm(tx, at);
        let rng = &mut self.nodes[tx.index()].fade_rng;
        let fade = *fades.entry((f, at)).or_insert_with(|| rayleigh_fade_db(rng));
        (mean, fade)
    }

    pub(super) fn resolve_slot(
        &mut self,
        t0: f64,
        senders: &[NodeId],
        engine: &mut Engine<Ev>,
    ) -> Result<(), SimError> {
        if senders.is_empty() {
            return Ok(());
        }
        let mac = self.prep.config.mac.clone();
        let radio = self.prep.config.radio.clone();
        let timing = self.prep.exchange;
        let mut exchanges = Vec::with_capacity(senders.len());
        let mut agenda = Agenda {
            items: Vec::new(),
            seq: 0,
        };
        for &s in senders {
            let node = &mut self.nodes[s.index()];
            let (Some(receiver), Some(&packet)) = (node.parent, node.queue.head()) else {
                continue;
            };
            let start = match mac.mode {
                MacMode::Schedule => t0,
                MacMode::Contention => {
                    t0 + f64::from(contention_draw(node.cw, &mut node.backoff_rng))
                        * mac.backoff_unit
                }
            };
            agenda.push(start, Act::Expire(exchanges.len()));
            exchanges.push(Exchange {
                sender: s,
                receiver,
                packet,
                start,
                grant_ok: false,
                ack_ok: false,
                outcome: None,
                deferred_on: None,
            });
        }

        let mut frames: Vec<Frame> = Vec::new();
        let mut fades: HashMap<(usize, NodeId), f64> = HashMap::new();
        let mut active: HashSet<NodeId> = HashSet::new();
        let mut engaged: HashSet<NodeId> = HashSet::new();

        while let Some((now, act)) = agenda.pop() {
            match act {
                Act::Expire(e) => {
                    let sender = exchanges[e].sender;
                    if mac.mode == MacMode::Contention {
                        let mut heard: Option<usize> = None;
                        for f in 0..frames.len() {
                            if frames[f].start >= now || frames[f].tx == sender {
                                continue;
                            }
                            let (mean, fade) = self.faded(&frames, &mut fades, f, sender);
                            if mean + fade >= radio.sensitivity_dbm
                                && heard.is_none_or(|h| frames[f].start < frames[h].start)
                            {
                                heard = Some(f);
                            }
                        }
                        if heard.is_some() || engaged.contains(&sender) {
                            let x = &mut exchanges[e];
                            x.outcome = Some(AttemptOutcome::Deferred);
                            x.deferred_on = heard;
                            continue;
                        }
                    }
                    active.insert(sender);
                    self.mac_attempts += 1;
                    agenda.push(now, Act::Start(e, Stage::Beacon));
                }
                Act::Start(e, stage) => {
                    let x = &exchanges[e];
                    let (tx, dst, dur) = match stage {
                        Stage::Beacon => (x.sender, x.receiver, timing.control),
                        Stage::Grant => (x.receiver, x.sender, timing.control),
                        Stage::Data => (x.sender, x.receiver, timing.data),
                        Stage::Ack => (x.receiver, x.sender, timing.control),
                    };
                    frames.push(Frame {
                        tx,
                        dst,
                        start: now,
                        end: now + dur,
                        ex: e,
                        stage,
                    });
                    agenda.push(now + dur, Act::End(frames.len() - 1));
                }
                Act::End(fi) => {
                    let dst = frames[fi].dst;
                    let e = frames[fi].ex;
                    let half_duplex = frames
                        .iter()
                        .enumerate()
                        .any(|(g, fr)| g != fi && fr.tx == dst && fr.overlaps(&frames[fi]));
                    let outcome = if half_duplex {
                        LinkOutcome::LostFade
                    } else {
                        let mut interferers = Vec::new();
                        for g in 0..frames.len() {
                            if g == fi
                                || frames[g].tx == frames[fi].tx
                                || !frames[g].overlaps(&frames[fi])
                            {
                                continue;
                            }
                            let (m, f) = self.faded(&frames, &mut fades, g, dst);
                            interferers.push(m + f);
                        }
                        let (mean, fade) = self.faded(&frames, &mut fades, fi, dst);
                        resolve_reception(mean, fade, &interferers, &radio)
                    };
                    let next = now + timing.turnaround;
                    match (outcome, frames[fi].stage) {
                        (LinkOutcome::Delivered, Stage::Beacon) => {
                            let r = exchanges[e].receiver;
                            if active.contains(&r) || engaged.contains(&r) {
                                exchanges[e].outcome = Some(AttemptOutcome::Lost);
                            } else {
                                engaged.insert(r);
                                agenda.push(next, Act::Start(e, Stage::Grant));
                            }
                        }
                        (LinkOutcome::Delivered, Stage::Grant) => {
                            exchanges[e].grant_ok = true;
                            agenda.push(next, Act::Start(e, Stage::Data));
                        }
                        (LinkOutcome::Delivered, Stage::Data) => {
                            let (r, p) = (exchanges[e].receiver, exchanges[e].packet);
                            self.deliver(r, p, now, engine)?;
                            agenda.push(next, Act::Start(e, Stage::Ack));
                        }
                        (LinkOutcome::Delivered, Stage::Ack) => {
                            exchanges[e].ack_ok = true;
                            exchanges[e].outcome = Some(AttemptOutcome::Success);
                        }
                        (LinkOutcome::LostCollision, _) => {
                            exchanges[e].outcome = Some(AttemptOutcome::Collision);
                        }
                        _ => {
                            exchanges[e].outcome = Some(AttemptOutcome::Lost);
                        }
                    }
                }
            }
        }

        // Always-on devices: charge their own transmissions and the frames
        // addressed to them.
        for (i, f) in frames.iter().enumerate() {
            let dur = f.end - f.start;
            if self.nodes[f.tx.index()].role.is_ffd() {
                self.nodes[f.tx.index()].ledger.tx_s += dur;
            }
            let dst = &self.nodes[f.dst.index()];
            let busy = frames
                .iter()
                .enumerate()
                .any(|(g, o)| g != i && o.tx == f.dst && o.overlaps(f));
            if dst.role.is_ffd() && !busy {
                self.nodes[f.dst.index()].ledger.rx_s += dur;
            }
        }

        for x in &exchanges {
            let outcome = x.outcome.unwrap_or(AttemptOutcome::Lost);
            if self.prep.config.trace {
                self.attempts.push(AttemptRecord {
                    node: x.sender,
                    slot_start: t0,
                    start: x.start,
                    outcome,
                });
            }
            self.charge_sender(t0, x, &frames, mac.mode)?;
            let node = &mut self.nodes[x.sender.index()];
            node.cw = backoff_window_update(node.cw, outcome, mac.cw_min, mac.cw_max);
            match outcome {
                AttemptOutcome::Success => {
                    node.queue.pop();
                    if node.role.is_ffd() {
                        node.relay.forwarded += 1;
                    }
                }
                AttemptOutcome::Deferred => self.deferrals += 1,
                AttemptOutcome::Collision | AttemptOutcome::Lost => {
                    if outcome == AttemptOutcome::Collision {
                        self.collisions += 1;
                    }
                    let head = node.queue.head_mut().expect("sender had a packet");
                    head.retries += 1;
                    if head.retries > mac.max_retries {
                        let p = node.queue.pop().expect("sender had a packet");
                        if node.role.is_ffd() {
                            node.relay.dropped += 1;
                        }
                        if !self.handed_over(x.receiver, &p) {
                            self.dropped += 1;
                            self.histogram.record_drop();
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn charge_sender(
        &mut self,
        t0: f64,
        x: &Exchange,
        frames: &[Frame],
        mode: MacMode,
    ) -> Result<(), SimError> {
        let node = &mut self.nodes[x.sender.index()];
        if node.role.is_ffd() {
            return Ok(());
        }
        let timing = self.prep.exchange;
        let l = &mut node.ledger;
        l.accrue(RadioState::Off, (t0 - node.ledger_until).max(0.0))?;
        let listen_from = if mode == MacMode::Contention { t0 } else { x.start };
        let end = if x.outcome == Some(AttemptOutcome::Deferred) {
            match x.deferred_on {
                Some(f) => {
                    let f = &frames[f];
                    let heard_from = f.start.max(listen_from);
                    l.accrue(RadioState::CarrierSense, heard_from - listen_from)?;
                    l.accrue(RadioState::Rx, f.end - heard_from)?;
                    f.end
                }
                None => {
                    l.accrue(RadioState::CarrierSense, x.start - listen_from)?;
                    x.start
                }
            }
        } else {
            l.accrue(RadioState::CarrierSense, x.start - listen_from)?;
            l.accrue(RadioState::Tx, timing.control)?;
            if x.grant_ok {
                l.accrue(RadioState::CarrierSense, timing.turnaround)?;
                l.accrue(RadioState::Rx, timing.control)?;
                l.accrue(RadioState::CarrierSense, timing.turnaround)?;
                l.accrue(RadioState::Tx, timing.data)?;
                l.accrue(RadioState::CarrierSense, timing.turnaround)?;
                let ack = if x.ack_ok {
                    RadioState::Rx
                } else {
                    RadioState::CarrierSense
                };
                l.accrue(ack, timing.control)?;
                x.start + timing.total()
            } else {
                l.accrue(RadioState::CarrierSense, timing.turnaround + timing.control)?;
                x.start + timing.grant().1
            }
        };
        node.ledger_until = end;
        Ok(())
    }
}
