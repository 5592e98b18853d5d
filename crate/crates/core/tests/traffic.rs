use approx::assert_relative_eq;
use parksim::traffic::{
    count_probability, delta_coefficient, expected_packet_count, occupancy_rate, periodic_next_emit,
    sample_weibull, OccupancyStatus, ParkingProcess, SpaceTraffic, TrafficError, WeibullParams,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Discrete, Poisson};
use statrs::function::gamma::gamma;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn empirical_mean(p: &WeibullParams, n: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    (0..n).map(|_| sample_weibull(p, &mut r)).sum::<f64>() / n as f64
}

#[test]
fn exponential_special_case_mean() {
    let p = WeibullParams::new(100.0, 1.0).unwrap();
    let m = empirical_mean(&p, 1_000_000, 11);
    assert!((m / 100.0 - 1.0).abs() < 0.01, "{m}");
}

#[test]
fn heavy_tailed_mean_is_twice_scale() {
    let p = WeibullParams::new(100.0, 0.5).unwrap();
    let m = empirical_mean(&p, 1_000_000, 12);
    assert!((m / 200.0 - 1.0).abs() < 0.02, "{m}");
}

#[test]
fn occupancy_rate_examples() {
    assert_relative_eq!(occupancy_rate(100.0, 0.5, 100.0, 0.5).unwrap(), 0.5);
    assert_relative_eq!(
        occupancy_rate(300.0, 0.5, 100.0, 1.0).unwrap(),
        600.0 / 700.0,
        max_relative = 1e-12
    );
}

#[test]
fn occupancy_rate_rejects_non_positive() {
    assert!(occupancy_rate(0.0, 0.5, 100.0, 0.5).is_err());
    assert!(occupancy_rate(100.0, -1.0, 100.0, 0.5).is_err());
}

#[test]
fn expected_packet_count_examples() {
    let s = SpaceTraffic::new(100.0, 0.5, 100.0, 0.5).unwrap();
    assert_relative_eq!(s.mean_cycle(), 400.0, max_relative = 1e-12);
    let n = expected_packet_count(&vec![s; 24], 86_400.0).unwrap();
    assert_relative_eq!(n, 10_368.0, max_relative = 1e-12);
    assert_eq!(expected_packet_count(&[], 86_400.0).unwrap(), 0.0);
}

#[test]
fn delta_coefficient_examples() {
    for j in 0..20 {
        assert_relative_eq!(delta_coefficient(j, 0, 1.0).unwrap(), 1.0, max_relative = 1e-12);
        if j >= 1 {
            assert_relative_eq!(delta_coefficient(j, 1, 1.0).unwrap(), j as f64, max_relative = 1e-10);
        }
    }
    let nu = 0.5;
    assert_relative_eq!(
        delta_coefficient(1, 1, nu).unwrap(),
        gamma(nu + 1.0) / gamma(2.0),
        max_relative = 1e-12
    );
    assert!(matches!(
        delta_coefficient(2, 3, nu),
        Err(TrafficError::InvalidParameter(_))
    ));
}

#[test]
fn count_zero_is_survival() {
    for &(t, g, nu) in &[(50.0, 100.0, 0.5), (300.0, 100.0, 0.5), (80.0, 40.0, 0.8), (2.0, 1.0, 1.0)] {
        let p = count_probability(0, t, g, nu).unwrap();
        let want = (-(t / g).powf(nu)).exp();
        assert!((p - want).abs() < 1e-9, "t={t} g={g} nu={nu}: {p} vs {want}");
    }
}

#[test]
fn unit_shape_reduces_to_poisson() {
    for &x in &[0.3, 1.0, 2.5, 5.0] {
        let oracle = Poisson::new(x).unwrap();
        for k in 0..=10u64 {
            let p = count_probability(k as usize, x * 100.0, 100.0, 1.0).unwrap();
            assert!((p - oracle.pmf(k)).abs() < 1e-9, "x={x} k={k}");
        }
    }
}

#[test]
fn count_distribution_normalizes() {
    for &(x, nu) in &[(2.0, 0.5), (1.0, 0.7), (4.0, 1.0)] {
        let total: f64 = (0..40).map(|k| count_probability(k, x, 1.0, nu).unwrap()).sum();
        assert!((1.0 - total).abs() < 1e-6, "x={x} nu={nu}: {total}");
    }
}

/// P(N(t)=1) = F(t) - (F*F)(t), convolution evaluated numerically with the
/// substitution s = t v^2 to absorb the density singularity at zero.
fn one_arrival_by_convolution(t: f64, g: f64, nu: f64) -> f64 {
    let f_cdf = |s: f64| 1.0 - (-(s / g).powf(nu)).exp();
    let f_pdf = |s: f64| (nu / g) * (s / g).powf(nu - 1.0) * (-(s / g).powf(nu)).exp();
    let integrand = |v: f64| {
        if v == 0.0 {
            return if nu == 0.5 { 2.0 * t * (nu / g) * (t / g).powf(-0.5) * f_cdf(t) } else { 0.0 };
        }
        let s = t * v * v;
        f_pdf(s) * f_cdf(t - s) * 2.0 * t * v
    };
    let n = 20_000;
    let h = 1.0 / n as f64;
    let mut acc = integrand(0.0) + integrand(1.0);
    for i in 1..n {
        acc += integrand(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    f_cdf(t) - acc * h / 3.0
}

#[test]
fn one_arrival_matches_convolution() {
    for &(t, nu) in &[(0.5, 0.5), (2.0, 0.5), (1.0, 0.75), (1.5, 1.0)] {
        let series = count_probability(1, t, 1.0, nu).unwrap();
        let oracle = one_arrival_by_convolution(t, 1.0, nu);
        assert!((series - oracle).abs() < 1e-6, "t={t} nu={nu}: {series} vs {oracle}");
    }
}

#[test]
fn count_probabilities_match_monte_carlo() {
    let trials = 100_000;
    for (seed, &nu) in [0.5, 1.0].iter().enumerate() {
        let (g, t) = (1.0, 1.5);
        let w = WeibullParams::new(g, nu).unwrap();
        let mut r = rng(100 + seed as u64);
        let mut hist = [0usize; 6];
        for _ in 0..trials {
            let (mut clock, mut k) = (0.0, 0usize);
            loop {
                clock += w.sample(&mut r);
                if clock > t {
                    break;
                }
                k += 1;
            }
            if k < hist.len() {
                hist[k] += 1;
            }
        }
        for (k, &c) in hist.iter().enumerate() {
            let p = count_probability(k, t, g, nu).unwrap();
            let emp = c as f64 / trials as f64;
            let sigma = (p * (1.0 - p) / trials as f64).sqrt().max(1e-6);
            assert!((emp - p).abs() < 3.0 * sigma + 1e-4, "nu={nu} k={k}: {emp} vs {p}");
        }
    }
}

#[test]
fn periodic_emit_examples() {
    assert_eq!(periodic_next_emit(60.0, 0.0, 0.0), 60.0);
    assert_eq!(periodic_next_emit(60.0, 12.5, 100.0), 132.5);
}

#[test]
fn transitions_alternate_and_draw_from_the_new_state() {
    let traffic = SpaceTraffic::new(300.0, 0.5, 100.0, 1.0).unwrap();
    let mut r = rng(5);
    let mut proc = ParkingProcess::start(traffic, OccupancyStatus::Vacant, 0.0, &mut r);
    for _ in 0..50 {
        let t = proc.next_toggle_at();
        let before = proc.status();
        let mut oracle_rng = r.clone();
        let (status, next) = proc.next_transition(t, &mut r).unwrap();
        assert_eq!(status, before.flipped());
        assert_eq!(proc.status_since(), t);
        let dist = match status {
            OccupancyStatus::Occupied => traffic.occupied,
            OccupancyStatus::Vacant => traffic.vacant,
        };
        assert_eq!(next, t + dist.sample(&mut oracle_rng));
    }
    let t = proc.next_toggle_at();
    assert!(proc.next_transition(t + 1.0, &mut r).is_err());
}

#[test]
fn long_run_occupied_fraction_matches_rate() {
    let traffic = SpaceTraffic::new(300.0, 0.5, 100.0, 1.0).unwrap();
    let mut r = rng(9);
    let mut proc = ParkingProcess::start(traffic, OccupancyStatus::Occupied, 0.0, &mut r);
    let mut occupied = 0.0;
    for _ in 0..400_000 {
        let t = proc.next_toggle_at();
        if proc.status() == OccupancyStatus::Occupied {
            occupied += t - proc.status_since();
        }
        proc.next_transition(t, &mut r).unwrap();
    }
    let frac = occupied / proc.status_since();
    assert!((frac / traffic.occupancy_rate() - 1.0).abs() < 0.015, "{frac}");
}

#[test]
fn smaller_shape_is_burstier() {
    let cv2 = |shape: f64| {
        let w = WeibullParams::from_mean(200.0, shape).unwrap();
        w.variance() / (w.mean() * w.mean())
    };
    assert_relative_eq!(cv2(1.0), 1.0, max_relative = 1e-12);
    assert_relative_eq!(cv2(0.5), 5.0, max_relative = 1e-12);
    assert!(cv2(0.5) > cv2(0.7) && cv2(0.7) > cv2(1.0));
}

proptest! {
    #[test]
    fn weibull_samples_are_positive(scale in 1e-3f64..1e4, shape in 0.2f64..3.0, seed: u64) {
        let p = WeibullParams::new(scale, shape).unwrap();
        let mut r = rng(seed);
        for _ in 0..64 {
            let x = sample_weibull(&p, &mut r);
            prop_assert!(x.is_finite() && x > 0.0);
        }
    }

    #[test]
    fn occupancy_rate_is_a_fraction(l in 1.0f64..1e4, a in 0.2f64..2.0, m in 1.0f64..1e4, b in 0.2f64..2.0) {
        let r = occupancy_rate(l, a, m, b).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
        let swapped = occupancy_rate(m, b, l, a).unwrap();
        prop_assert!((r + swapped - 1.0).abs() < 1e-12);
    }

    #[test]
    fn periodic_emit_is_on_grid_and_after_now(omega in 0.1f64..2000.0, frac in 0.0f64..1.0, now in 0.0f64..1e6) {
        let phase = frac * omega;
        let t = periodic_next_emit(omega, phase, now);
        prop_assert!(t > now);
        prop_assert!(t - omega <= now + 1e-9 * now.max(1.0) || t == phase);
        let k = ((t - phase) / omega).round();
        prop_assert!((phase + k * omega - t).abs() < 1e-6 * t.max(1.0));
    }

    #[test]
    fn count_probability_is_a_probability(k in 0usize..8, x in 0.01f64..3.0, nu in 0.3f64..1.0) {
        let p = count_probability(k, x, 1.0, nu).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }
}
