use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;
use qmine::grover::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sweep_thetas() -> Vec<f64> {
    // amplitudes 10^(-k/2) and 10^(-k-1/2), k = 2..6
    (2..=6)
        .flat_map(|k| [10f64.powf(-(k as f64) / 2.0), 10f64.powf(-(k as f64) - 0.5)])
        .map(f64::asin)
        .collect()
}

#[test]
fn quantum_at_least_classical_up_to_the_optimum() {
    for theta in sweep_thetas() {
        let g = GroverModel::new(theta, 1.0).unwrap();
        let c = ClassicalModel::new(g.marked_fraction(), 1.0).unwrap();
        let q_max = ((FRAC_PI_2 / theta - 1.0) / 2.0).floor() as u64;
        assert_eq!(g.optimal_iterations(), q_max);
        for q in 0..=q_max {
            let pq = grover_success_probability(q, &g);
            let pc = classical_success_probability(q, &c);
            assert!(pq >= pc, "theta={theta} q={q}: {pq} < {pc}");
        }
    }
}

#[test]
fn zero_iterations_equals_one_hash() {
    for theta in sweep_thetas() {
        let g = GroverModel::new(theta, 1.0).unwrap();
        let kn = theta.sin().powi(2);
        let c = ClassicalModel::new(kn, 1.0).unwrap();
        assert!((grover_success_probability(0, &g) - kn).abs() <= 1e-14 * kn);
        assert!((classical_success_probability(1, &c) - kn).abs() <= 1e-12 * kn);
    }
}

#[test]
fn quadratic_regime_within_two_percent() {
    for theta in sweep_thetas() {
        let g = GroverModel::new(theta, 1.0).unwrap();
        let q_lim = (0.1 / theta).floor() as u64;
        let step = (q_lim / 5000).max(1);
        let mut worst = 0.0f64;
        let mut q = 0;
        while q <= q_lim {
            let x = (2 * q + 1) as f64 * theta;
            let rel = (grover_success_probability(q, &g) - x * x).abs() / (x * x);
            worst = worst.max(rel);
            q += step;
        }
        assert!(worst <= 0.02, "theta={theta}: {worst}");
    }
}

#[test]
fn per_run_success_matches_monte_carlo() {
    // n = 1000, t = 1 min, I = 10: p_full = ln(10/9)/1000 ≈ 1.0536e-4
    let c = calibrate(1000, 1.0, 10.0, 0.01).unwrap();
    let p = grover_success_probability(c.q_total, &c.model());
    let draws = 10_000_000u64;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let hits = (0..draws).filter(|_| rng.random::<f64>() < p).count() as f64;
    let sigma = (p * (1.0 - p) / draws as f64).sqrt();
    assert!((hits / draws as f64 - 1.0536e-4).abs() < 3.0 * sigma + 1e-8);
}

proptest! {
    #[test]
    fn probabilities_are_probabilities(theta in 1e-6f64..FRAC_PI_2, q in 0u64..100_000) {
        let g = GroverModel::new(theta, 1.0).unwrap();
        let p = grover_success_probability(q, &g);
        prop_assert!((0.0..=1.0).contains(&p));
        let c = ClassicalModel::new(g.marked_fraction().max(1e-300), 1.0).unwrap();
        let pc = classical_success_probability(q, &c);
        prop_assert!((0.0..=1.0).contains(&pc));
    }

    #[test]
    fn grover_nondecreasing_before_optimum(theta in 1e-4f64..0.5, frac in 0.0f64..1.0) {
        let g = GroverModel::new(theta, 1.0).unwrap();
        let q = (frac * g.optimal_iterations() as f64) as u64;
        if q < g.optimal_iterations() {
            prop_assert!(grover_success_probability(q + 1, &g) >= grover_success_probability(q, &g));
        }
    }

    #[test]
    fn calibration_round_trips(n in 1usize..5000, t_frac in 0.001f64..0.99, t_it in 0.001f64..0.1) {
        let t = t_frac * 10.0;
        match calibrate(n, t, 10.0, t_it) {
            Ok(c) => {
                prop_assert!(c.p_full > 0.0 && c.p_full <= 1.0);
                let p = grover_success_probability(c.q_total, &c.model());
                prop_assert!(((p - c.p_full) / c.p_full).abs() < 1e-12);
            }
            Err(qmine::Error::CalibrationInfeasible { p_full, .. }) => prop_assert!(p_full > 1.0),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }
}
