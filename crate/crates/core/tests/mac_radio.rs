use approx::assert_relative_eq;
use parksim::mac::{
    backoff_window_update, contention_draw, contention_slot, duty_cycle_length, next_owned_slot,
    AttemptOutcome, ContentionOutcome, DutyCycleConfig, EnqueueOutcome, MacError, MacMode, Packet,
    QueuePolicy, ScheduleLayout, TxQueue,
};
use parksim::radio::{
    airtime, link_delivers, mean_rx_power_dbm, path_loss_db, rayleigh_fade_db, resolve_reception,
    EnergyLedger, LinkOutcome, RadioParams, RadioState,
};
use parksim::traffic::OccupancyStatus;
use parksim::NodeId;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pkt(seq: u64, changed_at: f64) -> Packet {
    Packet {
        source: NodeId(1),
        seq,
        status: OccupancyStatus::Occupied,
        status_changed_at: changed_at,
        created_at: changed_at,
        retries: 0,
    }
}

#[test]
fn duty_cycle_length_examples() {
    assert_relative_eq!(duty_cycle_length(MacMode::Schedule, 0.1, 0.0, 24), 2.5, max_relative = 1e-12);
    assert_relative_eq!(duty_cycle_length(MacMode::Contention, 0.1, 0.9, 24), 1.0, max_relative = 1e-12);
    assert_relative_eq!(duty_cycle_length(MacMode::Schedule, 0.1, 0.4, 0), 0.5, max_relative = 1e-12);
}

#[test]
fn slot_owner_mapping() {
    let members: Vec<NodeId> = (1..=24).map(NodeId).collect();
    let layout = ScheduleLayout::new(NodeId(0), members.clone());
    assert_eq!(layout.slot_owner(0).unwrap(), NodeId(0));
    assert_eq!(layout.slot_owner(5).unwrap(), members[4]);
    assert_eq!(layout.slot_owner(5).unwrap(), layout.slot_owner(5).unwrap());
    assert_eq!(layout.slot_of(members[4]).unwrap(), 5);
    assert!(matches!(layout.slot_owner(26), Err(MacError::SlotOutOfRange { .. })));
    assert!(matches!(layout.slot_of(NodeId(99)), Err(MacError::NotAMember(_))));
}

#[test]
fn failed_reservation_retries_one_cycle_later() {
    let (slot, n) = (0.1, 24);
    let cycle = duty_cycle_length(MacMode::Schedule, slot, 0.0, n);
    let (c, t) = next_owned_slot(5, slot, cycle, 0.0);
    assert_eq!((c, t), (0, 0.5));
    let (c2, t2) = next_owned_slot(5, slot, cycle, t);
    assert_eq!(c2, c + 1);
    assert_relative_eq!(t2 - t, slot * (n as f64 + 1.0), max_relative = 1e-12);
}

#[test]
fn contention_draw_examples() {
    let mut r = rng(1);
    assert!((0..1000).all(|_| contention_draw(1, &mut r) == 0));
    let n = 100_000;
    let mean = (0..n).map(|_| contention_draw(32, &mut r) as f64).sum::<f64>() / n as f64;
    assert!((mean - 15.5).abs() < 0.2, "{mean}");
}

#[test]
fn two_contenders_tie_with_birthday_probability() {
    let mut r = rng(2);
    let trials = 10_000;
    let contenders = [(NodeId(1), 32), (NodeId(2), 32)];
    let ties = (0..trials)
        .filter(|_| matches!(contention_slot(&contenders, &mut r).0, ContentionOutcome::Collision(_)))
        .count();
    let p = 1.0 / 32.0;
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    let emp = ties as f64 / trials as f64;
    assert!((emp - p).abs() < 3.0 * sigma, "{emp}");
}

#[test]
fn contention_slot_trivial_cases() {
    let mut r = rng(3);
    assert_eq!(contention_slot(&[], &mut r).0, ContentionOutcome::Idle);
    for _ in 0..100 {
        assert_eq!(
            contention_slot(&[(NodeId(7), 32)], &mut r).0,
            ContentionOutcome::Winner(NodeId(7))
        );
    }
}

#[test]
fn contention_is_fair_among_equal_windows() {
    let mut r = rng(4);
    let contenders: Vec<(NodeId, u32)> = (0..4).map(|i| (NodeId(i), 32)).collect();
    let mut wins = [0u32; 4];
    let trials = 40_000;
    for _ in 0..trials {
        if let ContentionOutcome::Winner(w) = contention_slot(&contenders, &mut r).0 {
            wins[w.index()] += 1;
        }
    }
    let total: u32 = wins.iter().sum();
    let p = 0.25;
    let sigma = (p * (1.0 - p) / total as f64).sqrt();
    for w in wins {
        assert!((w as f64 / total as f64 - p).abs() < 4.0 * sigma, "{wins:?}");
    }
}

#[test]
fn backoff_window_examples() {
    assert_eq!(backoff_window_update(32, AttemptOutcome::Collision, 32, 256), 64);
    assert_eq!(backoff_window_update(256, AttemptOutcome::Collision, 32, 256), 256);
    for cw in [32, 64, 128, 256] {
        assert_eq!(backoff_window_update(cw, AttemptOutcome::Success, 32, 256), 32);
    }
    assert_eq!(backoff_window_update(64, AttemptOutcome::Deferred, 32, 256), 64);
    assert_eq!(backoff_window_update(8, AttemptOutcome::Lost, 8, 32), 16);
}

#[test]
fn queue_examples() {
    let mut q = TxQueue::new(64);
    assert_eq!(q.enqueue(pkt(0, 1.0), QueuePolicy::Append), EnqueueOutcome::Queued);
    assert_eq!(q.len(), 1);

    let mut periodic = TxQueue::new(64);
    periodic.enqueue(pkt(0, 1.0), QueuePolicy::ReplaceStale);
    let out = periodic.enqueue(pkt(1, 2.0), QueuePolicy::ReplaceStale);
    assert_eq!(out, EnqueueOutcome::Replaced(pkt(0, 1.0)));
    assert_eq!(periodic.len(), 1);
    assert_eq!(periodic.head().unwrap().seq, 1);

    let mut event = TxQueue::new(64);
    event.enqueue(pkt(0, 1.0), QueuePolicy::Append);
    event.enqueue(pkt(1, 2.0), QueuePolicy::Append);
    assert_eq!(event.len(), 2);
    assert_eq!(event.pop().unwrap().seq, 0);
    assert_eq!(event.pop().unwrap().seq, 1);

    let mut small = TxQueue::new(1);
    small.enqueue(pkt(0, 1.0), QueuePolicy::Append);
    assert_eq!(small.enqueue(pkt(1, 2.0), QueuePolicy::Append), EnqueueOutcome::Overflow(pkt(1, 2.0)));
}

#[test]
fn contention_config_must_fit_backoff_in_slot() {
    let mut c = DutyCycleConfig::default();
    assert!(c.validate(2.688e-3).is_ok());
    c.slot = 0.005;
    assert!(matches!(c.validate(2.688e-3), Err(MacError::BackoffExceedsSlot { .. })));
    c.mode = MacMode::Schedule;
    assert!(c.validate(2.688e-3).is_ok());
    c.slot = 0.0;
    assert!(matches!(c.validate(2.688e-3), Err(MacError::InvalidConfig(_))));
}

#[test]
fn airtime_examples() {
    assert_relative_eq!(airtime(84, 250_000.0), 2.688e-3, max_relative = 1e-12);
    assert_relative_eq!(airtime(12, 250_000.0), 0.384e-3, max_relative = 1e-12);
    assert_relative_eq!(RadioParams::default().data_airtime(), 2.688e-3, max_relative = 1e-12);
}

#[test]
fn path_loss_examples() {
    let p = RadioParams::default();
    let oracle = 20.0 * (4.0 * std::f64::consts::PI * 10.0 / 0.125_f64).log10();
    assert!((oracle - 60.05).abs() < 0.01);
    assert_relative_eq!(path_loss_db(10.0, 0, &p), oracle, max_relative = 1e-12);
    assert_relative_eq!(path_loss_db(10.0, 1, &p), oracle + 20.0, max_relative = 1e-12);
    assert!((path_loss_db(20.0, 0, &p) - path_loss_db(10.0, 0, &p) - 6.0206).abs() < 1e-3);
}

#[test]
fn link_budget_examples() {
    let p = RadioParams::default();
    let rx = mean_rx_power_dbm(3.0, 10.0, 0, &p);
    assert!((rx + 57.05).abs() < 0.01, "{rx}");
    assert_eq!(resolve_reception(rx, 0.0, &[], &p), LinkOutcome::Delivered);
    let far = mean_rx_power_dbm(-7.0, 200.0, 0, &p);
    assert!((far + 93.06).abs() < 0.05, "{far}");
    let mut r = rng(5);
    for _ in 0..1000 {
        assert_eq!(link_delivers(far, &[], &p, &mut r), LinkOutcome::BelowSensitivity);
    }
}

#[test]
fn equal_power_frames_collide() {
    let p = RadioParams::default();
    assert_eq!(resolve_reception(-60.0, 0.0, &[-60.0], &p), LinkOutcome::LostCollision);
    let mut r = rng(6);
    let mut collided = 0;
    for _ in 0..1000 {
        let fa = rayleigh_fade_db(&mut r);
        let fb = rayleigh_fade_db(&mut r);
        let a = resolve_reception(-60.0, fa, &[-60.0 + fb], &p);
        let b = resolve_reception(-60.0, fb, &[-60.0 + fa], &p);
        assert!(!(a == LinkOutcome::Delivered && b == LinkOutcome::Delivered));
        collided += (a == LinkOutcome::LostCollision && b == LinkOutcome::LostCollision) as u32;
    }
    assert!(collided > 0);
}

#[test]
fn rayleigh_power_gain_is_unit_exponential() {
    let mut r = rng(7);
    let n = 200_000;
    let gains: Vec<f64> = (0..n).map(|_| 10f64.powf(rayleigh_fade_db(&mut r) / 10.0)).collect();
    let mean = gains.iter().sum::<f64>() / n as f64;
    assert!((mean - 1.0).abs() < 0.01, "{mean}");
    let deep = gains.iter().filter(|&&g| g < 0.1).count() as f64 / n as f64;
    let p = 1.0 - (-0.1f64).exp();
    assert!((deep - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "{deep}");
}

#[test]
fn ledger_examples() {
    let p = RadioParams::default();
    let mut tx = EnergyLedger::new(RadioState::Tx);
    tx.accrue(RadioState::Tx, 2.688e-3).unwrap();
    assert_relative_eq!(tx.joules(&p), 1.766e-4, max_relative = 1e-3);

    let mut off = EnergyLedger::new(RadioState::Off);
    off.accrue(RadioState::Off, 1.0).unwrap();
    assert_relative_eq!(off.joules(&p), 3e-5, max_relative = 1e-12);

    let mut l = EnergyLedger::new(RadioState::Rx);
    assert!(!l.switch_to(RadioState::CarrierSense));
    assert_eq!(l.switches, 0);
    let mut l = EnergyLedger::new(RadioState::Off);
    assert!(l.switch_to(RadioState::Rx));
    assert_eq!(l.switches, 1);
    assert_relative_eq!(l.joules(&p), 0.16425e-3, max_relative = 1e-12);
    assert!(l.accrue(RadioState::Rx, -1.0).is_err());
}

proptest! {
    #[test]
    fn backoff_window_stays_in_bounds(steps in prop::collection::vec(0u8..4, 1..50)) {
        let (min, max) = (8, 32);
        let mut cw = min;
        for s in steps {
            let o = [AttemptOutcome::Success, AttemptOutcome::Collision, AttemptOutcome::Lost, AttemptOutcome::Deferred][s as usize];
            cw = backoff_window_update(cw, o, min, max);
            prop_assert!((min..=max).contains(&cw));
        }
    }

    #[test]
    fn draws_stay_below_window(cw in 1u32..1024, seed: u64) {
        let mut r = rng(seed);
        for _ in 0..32 {
            prop_assert!(contention_draw(cw, &mut r) < cw);
        }
    }

    #[test]
    fn capture_lets_at_most_one_frame_through(a in -84.0f64..-20.0, b in -84.0f64..-20.0, fa in -30.0f64..10.0, fb in -30.0f64..10.0) {
        let p = RadioParams::default();
        let ra = resolve_reception(a, fa, &[b + fb], &p);
        let rb = resolve_reception(b, fb, &[a + fa], &p);
        prop_assert!(!(ra == LinkOutcome::Delivered && rb == LinkOutcome::Delivered));
        if a + fa >= b + fb + p.capture_threshold_db + 1e-9 && a + fa >= p.sensitivity_dbm {
            prop_assert_eq!(ra, LinkOutcome::Delivered);
        }
    }

    #[test]
    fn path_loss_grows_with_distance(d1 in 1.0f64..1000.0, d2 in 1.0f64..1000.0, c in 0u32..3) {
        let p = RadioParams::default();
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(path_loss_db(lo, c, &p) <= path_loss_db(hi, c, &p));
        prop_assert!(path_loss_db(lo, c, &p) < path_loss_db(lo, c + 1, &p));
    }

    #[test]
    fn energy_is_monotone_and_time_additive(steps in prop::collection::vec((0u8..4, 0.0f64..10.0), 0..60)) {
        let p = RadioParams::default();
        let mut l = EnergyLedger::new(RadioState::Off);
        let (mut prev, mut total) = (0.0, 0.0);
        for (s, d) in steps {
            let st = [RadioState::Tx, RadioState::Rx, RadioState::CarrierSense, RadioState::Off][s as usize];
            l.accrue(st, d).unwrap();
            total += d;
            let j = l.joules(&p);
            prop_assert!(j >= prev);
            prev = j;
        }
        prop_assert!((l.total_time() - total).abs() < 1e-9 * total.max(1.0));
    }
}
