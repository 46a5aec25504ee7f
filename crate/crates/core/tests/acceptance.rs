//! Acceptance suite: one test per acceptance criterion, each printing a
//! single `acceptance N (...): PASS` line when its assertions hold.
//!
//! Criteria 1–4 and 8 share one batch of ten seeded 100-step runs of the
//! five-sensor ship scenario, computed once and reused.

use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{dmatrix, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use dsme_core::sim::{metrics, run_simulation, write_csv, Scenario, ScenarioConfig, Simulation};
use dsme_core::system::{laplace_second_moment, sample_laplace, ship_matrices};
use dsme_core::trigger::{trigger_step, TriggerParams, TriggerState};
use dsme_core::{
    design_gains, privacy_epsilon, solve_steady_state, verify_lmi, Error, SignMode, SimulationLog,
};

const SEEDS: u64 = 10;
const HORIZON: usize = 100;

struct Batch {
    logs: Vec<SimulationLog>,
    elapsed_s: f64,
}

fn ship_batch() -> &'static Batch {
    static BATCH: OnceLock<Batch> = OnceLock::new();
    BATCH.get_or_init(|| {
        let cfg = ScenarioConfig::ship();
        assert_eq!(cfg.horizon, HORIZON);
        let scenario = Scenario::from_config(&cfg).unwrap();
        let t0 = Instant::now();
        let logs = (0..SEEDS)
            .map(|seed| run_simulation(&scenario, seed).unwrap())
            .collect();
        Batch {
            logs,
            elapsed_s: t0.elapsed().as_secs_f64(),
        }
    })
}

#[test]
fn acceptance_1_containment() {
    let batch = ship_batch();
    let mut violations = 0usize;
    for log in &batch.logs {
        assert_eq!(log.records.len(), HORIZON);
        for rec in &log.records {
            violations += rec.contained.iter().filter(|c| !**c).count();
        }
    }
    assert_eq!(
        violations, 0,
        "containment violated {violations} times across {SEEDS} seeds"
    );
    assert!(
        batch.elapsed_s < 60.0,
        "{SEEDS} seeded runs took {:.1}s (limit 60s)",
        batch.elapsed_s
    );
    println!(
        "acceptance 1 (containment, {SEEDS} seeds x {HORIZON} steps, {:.1}s): PASS",
        batch.elapsed_s
    );
}

#[test]
fn acceptance_2_trigger_sparsity() {
    let batch = ship_batch();
    for (seed, log) in batch.logs.iter().enumerate() {
        let m = metrics(log);
        for (i, s) in m.per_sensor.iter().enumerate() {
            assert!(
                s.trigger_rate < 1.0,
                "seed {seed} sensor {i} trigger rate {} not < 1.0",
                s.trigger_rate
            );
        }
        assert!(
            m.overall_trigger_rate <= 0.6,
            "seed {seed} overall trigger rate {} exceeds 0.6",
            m.overall_trigger_rate
        );
        assert!(
            m.overall_mean_interval >= 1.5,
            "seed {seed} mean inter-event interval {} below 1.5",
            m.overall_mean_interval
        );
    }
    println!("acceptance 2 (trigger sparsity): PASS");
}

#[test]
fn acceptance_3_delta_nonnegative() {
    let batch = ship_batch();
    for log in &batch.logs {
        for rec in &log.records {
            for &d in &rec.delta {
                assert!(d >= -1e-12, "delta {d} below -1e-12 at step {}", rec.k);
            }
        }
    }
    // 1e5 randomized scalar trigger sequences under the validated parameter
    // ranges.
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    for _ in 0..100_000 {
        let sigma: f64 = rng.random_range(0.0..0.999);
        let rho: f64 = rng.random_range(0.05..0.95);
        let theta = rng.random_range(1.0..50.0) / rho;
        let delta0: f64 = rng.random_range(0.0..2.0);
        let psi = dmatrix![rng.random_range(0.01..10.0)];
        let params = TriggerParams::new(sigma, rho, theta, delta0).unwrap();
        let mut state = TriggerState::new(&params, 1);
        let len = rng.random_range(1..=12);
        for k in 0..len {
            let y = DVector::from_element(1, rng.random_range(-3.0..3.0));
            let (_, next) = trigger_step(&state, &params, k, &y, &psi).unwrap();
            assert!(next.delta >= -1e-12, "delta {} below -1e-12", next.delta);
            state = next;
        }
    }
    println!("acceptance 3 (delta nonnegativity, 1e5 random sequences): PASS");
}

#[test]
fn acceptance_4_lmi_certification() {
    let batch = ship_batch();
    // Every solved step in the batch carries its certified residual.
    for log in &batch.logs {
        for rec in &log.records {
            assert!(
                rec.lmi_residual <= 1e-6,
                "step {} residual {:.3e} exceeds 1e-6",
                rec.k,
                rec.lmi_residual
            );
        }
    }
    // Independent re-verification over the first steps of a fresh run.
    let scenario = Scenario::from_config(&ScenarioConfig::ship()).unwrap();
    let mut sim = Simulation::new(&scenario, 0).unwrap();
    let opts = Default::default();
    for _ in 0..5 {
        let ctx = sim.step_context();
        let sol = design_gains(&ctx, &opts, None).unwrap();
        let residual = verify_lmi(&ctx, &sol);
        assert!(
            residual <= 1e-6,
            "re-verified residual {residual:.3e} exceeds 1e-6 at step {}",
            ctx.k
        );
        sim.step().unwrap();
    }
    // The literal sign convention for the privacy-noise block makes the
    // program infeasible on the ship scenario at step 0.
    let sim0 = Simulation::new(&scenario, 0).unwrap();
    let mut ctx = sim0.step_context();
    ctx.sign_mode = SignMode::LiteralSign;
    match design_gains(&ctx, &opts, None) {
        Err(Error::Infeasible { step: 0, .. }) => {}
        other => panic!("literal sign mode should be infeasible at step 0, got {other:?}"),
    }
    println!("acceptance 4 (per-step certification <= 1e-6; literal sign infeasible): PASS");
}

#[test]
fn acceptance_5_steady_state() {
    // Scalar case c = 0.5, m = 0, f = 1, r = 1 has fixed point
    // g = g/4 + 1 = 4/3.
    let half = dmatrix![0.5];
    let one = dmatrix![1.0];
    let zero = dmatrix![0.0];
    let report = solve_steady_state(&half, &one, &zero, &one, 1e-14, 10_000, None).unwrap();
    assert!(report.converged);
    assert!(
        (report.g[(0, 0)] - 4.0 / 3.0).abs() <= 1e-10,
        "scalar fixed point {} differs from 4/3",
        report.g[(0, 0)]
    );
    // Ship dynamics frozen at step 0, driven by the privacy-noise second
    // moment and the process-noise shape.
    let scenario = Scenario::from_config(&ScenarioConfig::ship()).unwrap();
    let (c0, f0) = ship_matrices(0);
    let m0 = DMatrix::identity(2, 2) * laplace_second_moment(scenario.privacy(), 0);
    let r0 = scenario.plant.process_noise.shape().clone();
    let report = solve_steady_state(&c0, &f0, &m0, &r0, 1e-12, 10_000, None).unwrap();
    assert!(report.spectral_radius < 1.0);
    assert!(report.converged && report.iterations < 10_000);
    assert!(
        report.residual <= 1e-10,
        "ship recursion residual {:.3e} exceeds 1e-10",
        report.residual
    );
    println!("acceptance 5 (steady state: scalar 4/3, ship fixed point): PASS");
}

#[test]
fn acceptance_6_laplace_statistics() {
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    let n = 1_000_000usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut tail = 0usize;
    for _ in 0..n {
        let x = sample_laplace(1.0, &mut rng);
        sum += x;
        sum_sq += x * x;
        if x.abs() > 3.0 {
            tail += 1;
        }
    }
    let mean = sum / n as f64;
    let var = sum_sq / n as f64 - mean * mean;
    assert!(
        (var / 2.0 - 1.0).abs() <= 0.05,
        "sample variance {var} outside 5% of 2"
    );
    let tail_rate = tail as f64 / n as f64;
    let expected = (-3.0f64).exp();
    assert!(
        (tail_rate / expected - 1.0).abs() <= 0.10,
        "tail rate {tail_rate} outside 10% of {expected}"
    );
    println!("acceptance 6 (Laplace sampler statistics, 1e6 draws): PASS");
}

#[test]
fn acceptance_7_privacy_budget() {
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    for _ in 0..100 {
        let varsigma: f64 = rng.random_range(0.1..5.0);
        let c: f64 = rng.random_range(0.1..5.0);
        let q: f64 = rng.random_range(0.05..0.95);
        let a_hat = q * rng.random_range(0.0..0.99);
        let eps = privacy_epsilon(varsigma, c, q, a_hat).unwrap();
        let expected = varsigma * q / (c * (q - a_hat));
        assert!(
            (eps - expected).abs() <= 1e-12 * expected.abs(),
            "epsilon {eps} differs from {expected}"
        );
        // The budget degenerates whenever the gain bound reaches the decay
        // rate.
        let bad = a_hat.max(q) + rng.random_range(0.0..1.0);
        match privacy_epsilon(varsigma, c, q, bad) {
            Err(Error::BudgetUndefined { .. }) => {}
            other => panic!("expected BudgetUndefined for a_hat {bad} >= q {q}, got {other:?}"),
        }
    }
    println!("acceptance 7 (privacy budget formula and degeneracy): PASS");
}

#[test]
fn acceptance_8_determinism_regression() {
    let batch = ship_batch();
    let scenario = Scenario::from_config(&ScenarioConfig::ship()).unwrap();
    let rerun = run_simulation(&scenario, 0).unwrap();

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    write_csv(&batch.logs[0], dir_a.path()).unwrap();
    write_csv(&rerun, dir_b.path()).unwrap();
    for name in [
        "states.csv",
        "triggers.csv",
        "ellipsoids.csv",
        "gains.csv",
        "summary.csv",
    ] {
        let a = std::fs::read(dir_a.path().join(name)).unwrap();
        let b = std::fs::read(dir_b.path().join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs between identical seeded runs");
    }

    // Frozen regression value for the summed confidence-set trace produced
    // by the very first gain design (seed-independent).
    const TRACE_U1_STEP0: f64 = 1.02918640976451275e3;
    let got = rerun.records[0].trace_u_next;
    assert!(
        (got / TRACE_U1_STEP0 - 1.0).abs() <= 1e-9,
        "step-0 trace {got:.17e} drifted from frozen {TRACE_U1_STEP0:.17e}"
    );
    println!("acceptance 8 (seed-0 determinism and frozen step-0 trace): PASS");
}
