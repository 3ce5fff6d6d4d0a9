//! Acceptance suite. Each test exercises one release criterion at its
//! stated tolerance and prints one PASS line on success (visible with
//! `cargo test -- --nocapture`).
//!
//! The two Monte Carlo criteria are statistical and sized for desk-scale
//! hardware; their stated runtime budgets assume 8 cores, so elapsed time is
//! printed for the record rather than asserted.

use std::time::Instant;

use rand::Rng;

use mdporder::ccf::backend::BackendSpec;
use mdporder::ccf::{draw_directions, split_sample, Direction};
use mdporder::enumchain::BinaryOrder2Chain;
use mdporder::gamma::{combine_components, compute_pi_sequence, PiSequence};
use mdporder::mc::run_mc;
use mdporder::pipeline::EstimatorConfig;
use mdporder::rng::substream;
use mdporder::signal::{estimate_order, signal_curve, RidgeSchedule, SignalCurve};
use mdporder::simulate::{simulate, Model, SimSpec};

#[test]
fn c1_reported_curve_yields_order_two() {
    let curve =
        SignalCurve::from_values(vec![0.500, 0.302, 0.798, 0.944, 0.925, 0.935], 3.0, 0.0)
            .unwrap();
    let estimate = estimate_order(&curve, 0.5).unwrap();
    assert_eq!(estimate.k_hat, Some(2));
    assert!(!estimate.undetermined);
    println!("ACCEPTANCE 1 (reported-curve unit test): PASS — k_hat = 2");
}

#[test]
fn c2_real_imaginary_decomposition_matches_complex_modulus() {
    let mut rng = substream(0xacce97, &[2]);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let v: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let (g_rm, g_im) = combine_components(v[0], v[1], v[2], v[3], v[4], v[5]);
        let via_parts = g_rm * g_rm + g_im * g_im;
        let re = v[0] - (v[2] * v[4] - v[3] * v[5]);
        let im = v[1] - (v[2] * v[5] + v[3] * v[4]);
        let via_complex = re * re + im * im;
        worst = worst.max((via_parts - via_complex).abs());
    }
    assert!(worst < 1e-12, "worst deviation {worst:e}");
    println!("ACCEPTANCE 2 (decomposition oracle): PASS — worst |diff| = {worst:.3e}");
}

#[test]
fn c3_zero_direction_deviation_is_exactly_zero() {
    let datasets = [
        simulate(&SimSpec::new(Model::Model1, 4, 30, 2, 3)).unwrap(),
        simulate(&SimSpec::new(Model::Iid, 4, 30, 2, 4)).unwrap(),
    ];
    let backends = [
        BackendSpec::Forest {
            trees: 25,
            min_leaf: 5,
        },
        BackendSpec::Knn { k: None },
    ];
    let mut cells_checked = 0;
    for dataset in &datasets {
        let split = split_sample(dataset, 1).unwrap();
        let zero = vec![Direction::zero(dataset.state_dim())];
        for spec in &backends {
            let backend = spec.build().unwrap();
            let grid =
                compute_pi_sequence(dataset, &split, &zero, 3, 2, backend.as_ref(), 9).unwrap();
            for cell in &grid.cells {
                assert_eq!(cell.value, 0.0, "{spec:?} {cell:?}");
                cells_checked += 1;
            }
        }
    }
    // The exact oracle satisfies the same identity on the enumerable chain.
    let chain = BinaryOrder2Chain::strongly_order_two();
    let dataset = chain.simulate(4, 40, 5).unwrap();
    let split = split_sample(&dataset, 1).unwrap();
    let zero = vec![Direction::zero(1)];
    let backend = chain.oracle_backend();
    let grid = compute_pi_sequence(&dataset, &split, &zero, 3, 2, &backend, 9).unwrap();
    for cell in &grid.cells {
        assert_eq!(cell.value, 0.0, "oracle {cell:?}");
        cells_checked += 1;
    }
    println!("ACCEPTANCE 3 (zero-direction invariant): PASS — {cells_checked} cells exactly 0");
}

#[test]
fn c4_enumerable_chain_oracle() {
    let started = Instant::now();
    let chain = BinaryOrder2Chain::strongly_order_two();
    let dataset = chain.simulate(4, 120, 11).unwrap();
    let split = split_sample(&dataset, 2).unwrap();
    let directions = draw_directions(20, 1, 13).unwrap();
    let backend = chain.oracle_backend();
    let grid = compute_pi_sequence(&dataset, &split, &directions, 3, 1, &backend, 0).unwrap();

    let mut max_high_order = 0.0f64;
    let mut max_k1 = 0.0f64;
    for cell in &grid.cells {
        if cell.k >= 2 {
            max_high_order = max_high_order.max(cell.value);
        } else {
            max_k1 = max_k1.max(cell.value);
        }
    }
    // Enumeration is exact; 1e-20 absorbs f64 rounding of the two routes.
    assert!(
        max_high_order < 1e-20,
        "deviation at k >= 2 should vanish, got {max_high_order:e}"
    );
    assert!(
        max_k1 > 1e-4,
        "deviation at k = 1 should be visible, got {max_k1:e}"
    );
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "took {elapsed:.1}s, budget 10s");
    println!(
        "ACCEPTANCE 4 (enumerable-chain oracle): PASS — max Γ(k>=2) = {max_high_order:.2e}, \
         max Γ(k=1) = {max_k1:.4}, {elapsed:.2}s"
    );
}

#[test]
fn c5_model1_monte_carlo_recovers_order_two() {
    let started = Instant::now();
    let spec = SimSpec::new(Model::Model1, 6, 200, 3, 20250809);
    let config = EstimatorConfig {
        k_max: 4,
        q_max: 2,
        num_directions: Some(6),
        seed: 20250809,
        ..EstimatorConfig::default()
    };
    let report = run_mc(&spec, &config, 50).unwrap();
    let freq = report.frequency_of(2);
    assert!(
        freq >= 0.7,
        "frequency of k_hat = 2 was {freq:.2}, needs >= 0.7"
    );
    println!(
        "ACCEPTANCE 5 (Model 1 Monte Carlo, 50 reps): PASS — P(k_hat = 2) = {freq:.2}, \
         {:.0}s wall on {} threads (budget 900s on 8 cores)",
        started.elapsed().as_secs_f64(),
        rayon::current_num_threads()
    );
}

#[test]
fn c6_iid_null_recovers_order_one() {
    let started = Instant::now();
    let spec = SimSpec::new(Model::Iid, 6, 200, 3, 31);
    let config = EstimatorConfig {
        seed: 31,
        ..EstimatorConfig::default()
    };
    let report = run_mc(&spec, &config, 25).unwrap();
    let freq = report.frequency_of(1);
    assert!(
        freq >= 0.7,
        "frequency of k_hat = 1 was {freq:.2}, needs >= 0.7"
    );
    println!(
        "ACCEPTANCE 6 (i.i.d. null, 25 reps): PASS — P(k_hat = 1) = {freq:.2}, \
         {:.0}s wall on {} threads (budget 480s on 8 cores)",
        started.elapsed().as_secs_f64(),
        rayon::current_num_threads()
    );
}

#[test]
fn c7_signal_suffix_is_scale_invariant() {
    let sched = RidgeSchedule::default();
    let mut rng = substream(0xacce97, &[7]);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let k_max = rng.random_range(2..=8usize);
        let raw: Vec<f64> = (0..k_max)
            .map(|_| 10f64.powf(rng.random_range(-8.0..0.0)))
            .collect();
        let lambda = 10f64.powf(rng.random_range(-4.0..4.0));
        let scaled: Vec<f64> = raw.iter().map(|v| v * lambda).collect();
        let base = signal_curve(
            &PiSequence::from_order_values(raw).unwrap(),
            &sched,
            3.0,
            3,
            150,
        )
        .unwrap();
        let moved = signal_curve(
            &PiSequence::from_order_values(scaled).unwrap(),
            &sched,
            3.0,
            3,
            150,
        )
        .unwrap();
        for k in 2..=k_max {
            worst = worst.max((base.omega()[k - 1] - moved.omega()[k - 1]).abs());
        }
    }
    assert!(worst < 1e-12, "worst deviation {worst:e}");
    println!("ACCEPTANCE 7 (scale invariance): PASS — worst |diff| = {worst:.3e}");
}

#[test]
fn c8_ridge_schedule_satisfies_the_rate_conditions() {
    let sched = RidgeSchedule::default();
    let c_at = |nt: usize| {
        // The schedule is a function of the product N_L * T only.
        sched.value(1, nt).unwrap()
    };

    // Decreasing from 30 upward, densely at the low end.
    let mut prev = c_at(30);
    for nt in 31..5000 {
        let next = c_at(nt);
        assert!(next < prev, "not decreasing at NT = {nt}");
        prev = next;
    }
    // Geometric grid 10^3 .. 10^9: decreasing ridge, diverging growth ratio.
    let grid: Vec<usize> = (3..=9).map(|e| 10usize.pow(e)).collect();
    let cs: Vec<f64> = grid.iter().map(|&nt| c_at(nt)).collect();
    assert!(cs.windows(2).all(|w| w[1] < w[0]), "ridge not decreasing: {cs:?}");
    let growth: Vec<f64> = grid
        .iter()
        .zip(&cs)
        .map(|(&nt, c)| c * (nt as f64).sqrt() / (nt as f64).ln().sqrt())
        .collect();
    assert!(
        growth.windows(2).all(|w| w[1] > w[0]),
        "growth ratio not increasing: {growth:?}"
    );
    println!(
        "ACCEPTANCE 8 (ridge schedule): PASS — decreasing on [30, 5000) and 10^3..10^9, \
         growth ratio {:.3} -> {:.3}",
        growth.first().unwrap(),
        growth.last().unwrap()
    );
}
