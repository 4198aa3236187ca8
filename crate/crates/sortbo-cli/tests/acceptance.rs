//! Acceptance gate: one test per release criterion, each printing a single
//! pass/fail line with its runtime. Oracles here are built independently of
//! the library internals they check.

use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sortbo::acquisition::{expected_improvement, CombinedWeights};
use sortbo::gpr::{fit, kernel_eval, KernelParams, Posterior, TrainingSet};
use sortbo::metrics::{
    accuracy_variance, aggregate_experiment, variance_scaling_fit, ConfusionMatrix,
    ExperimentRecord,
};
use sortbo::optimizer::{
    build_initial_design, reference_best, run, OptimizationConfig, SimulatorPlant,
};
use sortbo::point::ParameterPoint;
use sortbo::simulator::{mix_seed, run_experiment, SimulatorConfig};
use tempfile::TempDir;

fn verdict(name: &str, started: Instant, budget: Duration, ok: bool, detail: &str) {
    let elapsed = started.elapsed();
    let within = elapsed <= budget;
    let label = if ok && within { "PASS" } else { "FAIL" };
    println!("criterion {name}: {label} [{elapsed:.2?} of {budget:?}] {detail}");
    assert!(ok, "criterion {name}: {detail}");
    assert!(within, "criterion {name}: runtime {elapsed:?} exceeded {budget:?}");
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn pt(a: f64, b: f64, c: f64) -> ParameterPoint {
    ParameterPoint::new(a, b, c)
}

/// Textbook posterior from an explicit LU solve of the full regularized Gram
/// system, standardizing targets the same way the production path defines it.
fn dense_posterior(
    inputs: &[ParameterPoint],
    targets: &[f64],
    noise: &[f64],
    lambda: f64,
    kernel: &KernelParams,
    query: &ParameterPoint,
) -> (f64, f64) {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let spread = (targets.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if spread <= 1e-9 * mean.abs().max(1.0) { 1.0 } else { spread };

    let m = inputs.len();
    let gram = DMatrix::from_fn(m, m, |i, j| {
        let diag = if i == j { lambda * noise[i] / (scale * scale) + kernel.nugget } else { 0.0 };
        kernel_eval(&inputs[i], &inputs[j], kernel) + diag
    });
    let z = DVector::from_iterator(m, targets.iter().map(|y| (y - mean) / scale));
    let kstar = DVector::from_iterator(m, inputs.iter().map(|x| kernel_eval(query, x, kernel)));
    let lu = gram.lu();
    let alpha = lu.solve(&z).expect("regularized system solves");
    let weights = lu.solve(&kstar).expect("regularized system solves");
    let mean_std = kstar.dot(&alpha);
    let var_std = (kernel.signal_variance - kstar.dot(&weights)).max(0.0);
    (mean + scale * mean_std, var_std * scale * scale)
}

/// Training points on a jittered lattice so systems stay well conditioned at
/// the oracle's comparison tolerance.
fn lattice_dataset(rng: &mut ChaCha8Rng, n: usize) -> (Vec<ParameterPoint>, Vec<f64>, Vec<f64>) {
    let mut inputs = Vec::with_capacity(n);
    for i in 0..n {
        let base = [
            (i % 3) as f64 * 4.0,
            ((i / 3) % 3) as f64 * 4.0,
            (i / 9) as f64 * 4.0,
        ];
        inputs.push(pt(
            base[0] + rng.random_range(-0.8..0.8) + 12.0,
            base[1] + rng.random_range(-0.8..0.8) + 1.0,
            base[2] + rng.random_range(-0.8..0.8) + 1.0,
        ));
    }
    let targets = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let noise = (0..n).map(|_| rng.random_range(1e-4..1e-2)).collect();
    (inputs, targets, noise)
}

#[test]
fn criterion_1_gpr_posterior_matches_dense_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC0_0001);
    let lambdas = [0.0, 0.1, 1.0];
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for dataset in 0..20 {
        let n = rng.random_range(3..=10);
        let (inputs, targets, noise) = lattice_dataset(&mut rng, n);
        let lambda = lambdas[dataset % lambdas.len()];
        let kernel = KernelParams {
            signal_variance: rng.random_range(0.5..2.0),
            length_scales: [
                rng.random_range(1.5..3.0),
                rng.random_range(1.5..3.0),
                rng.random_range(1.5..3.0),
            ],
            nugget: 1e-8,
        };
        let training =
            TrainingSet::new(inputs.clone(), targets.clone(), noise.clone(), lambda).unwrap();
        let model = fit(training, kernel, false).expect("fit succeeds");
        for _ in 0..5 {
            let query = pt(
                rng.random_range(11.0..23.0),
                rng.random_range(0.0..9.0),
                rng.random_range(0.0..9.0),
            );
            let predicted = model.predict(&query);
            let (mean, variance) =
                dense_posterior(&inputs, &targets, &noise, lambda, model.kernel(), &query);
            let mean_err = (predicted.mean - mean).abs() / mean.abs().max(1e-12);
            let var_err = (predicted.variance - variance).abs() / variance.abs().max(1e-12);
            worst = worst.max(mean_err).max(var_err);
            ok &= rel_close(predicted.mean, mean, 1e-8)
                && rel_close(predicted.variance, variance, 1e-8);
        }
    }
    verdict(
        "1 gpr-posterior-oracle",
        started,
        Duration::from_secs(1),
        ok,
        &format!("worst relative error {worst:.2e} (tolerance 1e-8)"),
    );
}

/// Standard error of the Monte-Carlo mean when the improvement distribution
/// is the one the closed form claims: Var[max(Y - f, 0)] from the truncated
/// first and second moments. A zero here means both tail moments underflow.
fn improvement_std_error(mu: f64, sigma: f64, f_best: f64, n: f64) -> f64 {
    let delta = mu - f_best;
    let u = delta / sigma;
    let normal = statrs::distribution::Normal::standard();
    let cdf = statrs::distribution::ContinuousCDF::cdf(&normal, u);
    let pdf = (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let first = delta * cdf + sigma * pdf;
    let second = (delta * delta + sigma * sigma) * cdf + delta * sigma * pdf;
    ((second - first * first).max(0.0) / n).sqrt()
}

#[test]
fn criterion_2_ei_closed_form_matches_monte_carlo() {
    let started = Instant::now();
    // Antithetic pairs: 10^6 normal evaluations per cell with lower estimator
    // variance, while the plain-sampling standard error stays the bound.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let samples: Vec<f64> = (0..500_000).map(|_| rng.sample(StandardNormal)).collect();
    let n = (2 * samples.len()) as f64;

    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    for &mu in &linspace(-1.0, 1.0, 5) {
        for &sigma in &linspace(0.01, 1.0, 5) {
            for &f_best in &linspace(-1.0, 1.0, 5) {
                let closed = expected_improvement(
                    Posterior { mean: mu, variance: sigma * sigma },
                    f_best,
                );
                let mut sum = 0.0;
                for &z in &samples {
                    sum += (mu + sigma * z - f_best).max(0.0);
                    sum += (mu - sigma * z - f_best).max(0.0);
                }
                let estimate = sum / n;
                let std_error = improvement_std_error(mu, sigma, f_best, n);
                let diff = (closed - estimate).abs();
                if std_error > 0.0 {
                    ok &= diff <= 3.0 * std_error;
                    worst_ratio = worst_ratio.max(diff / std_error);
                } else {
                    ok &= diff == 0.0;
                }
            }
        }
    }
    verdict(
        "2 ei-monte-carlo",
        started,
        Duration::from_secs(30),
        ok,
        &format!("worst |closed - mc| = {worst_ratio:.2} standard errors (limit 3)"),
    );
}

#[test]
fn criterion_3_interval_variance_follows_inverse_time() {
    let started = Instant::now();
    let config = SimulatorConfig::default();
    let intervals = run_experiment(&config, &pt(15.0, 2.0, 2.0), 2400, 5).unwrap();

    let mut series = Vec::new();
    for merge in [1usize, 2, 4, 8] {
        let rates: Vec<f64> = intervals
            .chunks(merge)
            .filter(|chunk| chunk.len() == merge)
            .filter_map(|chunk| {
                let merged = chunk
                    .iter()
                    .skip(1)
                    .fold(chunk[0].confusion, |acc, iv| acc.merged(&iv.confusion));
                merged.normalized_rates().0
            })
            .collect();
        let n = rates.len() as f64;
        let mean = rates.iter().sum::<f64>() / n;
        let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        series.push((5.0 * merge as f64, var));
    }
    let slope = variance_scaling_fit(&series).unwrap();
    let ok = (-1.15..=-0.85).contains(&slope);
    verdict(
        "3 variance-power-law",
        started,
        Duration::from_secs(60),
        ok,
        &format!("log-log slope {slope:.4} (window [-1.15, -0.85])"),
    );
}

/// The 250-point reference sweep for one simulator seed, measured exactly
/// like the loop measures experiments.
fn sweep_reference(base: &SimulatorConfig, weights: &CombinedWeights) -> ParameterPoint {
    let grid = build_initial_design(
        &(12..=21).map(f64::from).collect::<Vec<_>>(),
        &[0.0, 2.0, 4.0, 6.0, 8.0],
        &[0.0, 2.0, 4.0, 6.0, 8.0],
    );
    let mut records: Vec<ExperimentRecord> = Vec::with_capacity(grid.len());
    for (index, point) in grid.iter().enumerate() {
        let mut config = base.clone();
        config.seed = mix_seed(base.seed, index as u64);
        let intervals = run_experiment(&config, point, 300, 10).unwrap();
        records.push(aggregate_experiment(*point, &intervals).unwrap());
    }
    reference_best(&records, weights).expect("reference fit succeeds")
}

#[test]
fn criterion_4_optimization_converges_near_the_sweep_reference() {
    let started = Instant::now();
    let cfg = OptimizationConfig::default();
    let mut successes = 0;
    let mut report = Vec::new();
    for seed in 42..=46u64 {
        let mut simulator = SimulatorConfig::default();
        simulator.seed = seed;
        let mut plant = SimulatorPlant::new(simulator.clone(), cfg.duration_s, cfg.interval_s);
        let outcome = run(&cfg, &mut plant).expect("loop completes");
        let reference = sweep_reference(&simulator, &cfg.weights);
        let converged = outcome.status.is_converged() && outcome.steps_executed <= 8;
        let near = (outcome.best.reaction_lines - reference.reaction_lines).abs() <= 1.0;
        if converged && near {
            successes += 1;
        }
        report.push(format!(
            "seed {seed}: {} steps, best T_R {}, reference T_R {:.2}",
            outcome.steps_executed, outcome.best.reaction_lines, reference.reaction_lines
        ));
    }
    let ok = successes >= 4;
    verdict(
        "4 bo-convergence",
        started,
        Duration::from_secs(300),
        ok,
        &format!("{successes}/5 seeds converged within budget; {}", report.join("; ")),
    );
}

#[test]
fn criterion_5_reject_weighting_demands_more_spatial_extension() {
    let started = Instant::now();
    let accept_only = OptimizationConfig {
        weights: CombinedWeights::new(1.0, 0.0).unwrap(),
        ..OptimizationConfig::default()
    };
    let reject_only = OptimizationConfig {
        weights: CombinedWeights::new(0.0, 1.0).unwrap(),
        ..OptimizationConfig::default()
    };
    let mut successes = 0;
    let mut report = Vec::new();
    for seed in 42..=46u64 {
        let mut simulator = SimulatorConfig::default();
        simulator.seed = seed;
        let run_with = |cfg: &OptimizationConfig| {
            let mut plant = SimulatorPlant::new(simulator.clone(), cfg.duration_s, cfg.interval_s);
            run(cfg, &mut plant).expect("loop completes").best
        };
        let accept_best = run_with(&accept_only);
        let reject_best = run_with(&reject_only);
        if reject_best.extended_space >= accept_best.extended_space {
            successes += 1;
        }
        report.push(format!(
            "seed {seed}: S_E {} vs {}",
            reject_best.extended_space, accept_best.extended_space
        ));
    }
    let ok = successes >= 4;
    verdict(
        "5 weight-direction",
        started,
        Duration::from_secs(600),
        ok,
        &format!("{successes}/5 seeds ordered; {}", report.join("; ")),
    );
}

#[test]
fn criterion_6_noise_weight_orders_posterior_variance_pointwise() {
    let started = Instant::now();
    // Fixed ledger: a 27-point mini sweep at the default seed.
    let base = SimulatorConfig::default();
    let grid = build_initial_design(
        &[12.0, 15.0, 18.0],
        &[0.0, 4.0, 8.0],
        &[0.0, 4.0, 8.0],
    );
    let mut records = Vec::with_capacity(grid.len());
    for (index, point) in grid.iter().enumerate() {
        let mut config = base.clone();
        config.seed = mix_seed(base.seed, index as u64);
        let intervals = run_experiment(&config, point, 300, 10).unwrap();
        records.push(aggregate_experiment(*point, &intervals).unwrap());
    }

    let initial =
        KernelParams { signal_variance: 1.0, length_scales: [1.0, 1.0, 1.0], nugget: 1e-8 };
    let fit_at = |target: fn(&ExperimentRecord) -> f64,
                  noise: fn(&ExperimentRecord) -> f64,
                  lambda: f64,
                  kernel: KernelParams,
                  optimize: bool| {
        let training = TrainingSet::new(
            records.iter().map(|r| r.params).collect(),
            records.iter().map(target).collect(),
            records.iter().map(noise).collect(),
            lambda,
        )
        .unwrap();
        fit(training, kernel, optimize).expect("fit succeeds")
    };

    let tp_mean: fn(&ExperimentRecord) -> f64 = |r| r.tp_n_mean;
    let tp_var: fn(&ExperimentRecord) -> f64 = |r| r.tp_n_var;
    let tn_mean: fn(&ExperimentRecord) -> f64 = |r| r.tn_n_mean;
    let tn_var: fn(&ExperimentRecord) -> f64 = |r| r.tn_n_var;
    let accept_kernel = *fit_at(tp_mean, tp_var, 0.1, initial, true).kernel();
    let reject_kernel = *fit_at(tn_mean, tn_var, 0.1, initial, true).kernel();

    let mut ok = true;
    let queries: Vec<ParameterPoint> = {
        let axis_t = linspace(12.0, 21.0, 20);
        let axis_e = linspace(0.0, 8.0, 20);
        let mut q = Vec::with_capacity(8000);
        for &a in &axis_t {
            for &b in &axis_e {
                for &c in &axis_e {
                    q.push(pt(a, b, c));
                }
            }
        }
        q
    };
    for (target, noise, kernel) in
        [(tp_mean, tp_var, accept_kernel), (tn_mean, tn_var, reject_kernel)]
    {
        let low = fit_at(target, noise, 0.0, kernel, false);
        let mid = fit_at(target, noise, 0.1, kernel, false);
        let high = fit_at(target, noise, 1.0, kernel, false);
        for query in &queries {
            let v0 = low.predict(query).variance;
            let v1 = mid.predict(query).variance;
            let v2 = high.predict(query).variance;
            ok &= v1 >= v0 - 1e-12 && v2 >= v1 - 1e-12;
        }
    }
    verdict(
        "6 lambda-variance-ordering",
        started,
        Duration::from_secs(10),
        ok,
        "var(1.0) >= var(0.1) >= var(0.0) on the 20^3 grid, both streams",
    );
}

#[test]
fn criterion_7_metric_formulas_match_direct_arithmetic() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC0_0007);
    let mut ok = true;
    for _ in 0..1000 {
        let tp = rng.random_range(0..=500u64);
        let fn_ = rng.random_range(0..=500u64);
        let fp = rng.random_range(0..=500u64);
        let tn = rng.random_range(0..=500u64);
        let matrix = ConfusionMatrix::new(tp, fn_, fp, tn);

        let total = (tp + fn_ + fp + tn) as f64;
        match matrix.accuracy() {
            Ok(accuracy) => {
                ok &= total > 0.0 && (accuracy - (tp + tn) as f64 / total).abs() <= 1e-12;
            }
            Err(_) => ok &= total == 0.0,
        }

        let (tp_n, tn_n) = matrix.normalized_rates();
        match tp_n {
            Some(rate) => ok &= (rate - tp as f64 / (tp + fn_) as f64).abs() <= 1e-12,
            None => ok &= tp + fn_ == 0,
        }
        match tn_n {
            Some(rate) => ok &= (rate - tn as f64 / (tn + fp) as f64).abs() <= 1e-12,
            None => ok &= tn + fp == 0,
        }

        let p = rng.random_range(0.0..=1.0);
        let n_total = rng.random_range(1..=1_000_000u64);
        ok &= (accuracy_variance(p, n_total) - p * (1.0 - p) / n_total as f64).abs() <= 1e-12;

        let other = ConfusionMatrix::new(
            rng.random_range(0..=500),
            rng.random_range(0..=500),
            rng.random_range(0..=500),
            rng.random_range(0..=500),
        );
        let merged = matrix.merged(&other);
        ok &= merged.total() == matrix.total() + other.total();
    }
    verdict(
        "7 metrics-identities",
        started,
        Duration::from_secs(10),
        ok,
        "1000 random confusion matrices, tolerance 1e-12",
    );
}

#[test]
fn criterion_8_optimize_ledgers_are_byte_identical() {
    let started = Instant::now();
    let dir = TempDir::new().unwrap();
    let run_into = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let output = Command::new(env!("CARGO_BIN_EXE_sortbo"))
            .args(["optimize", "--seed", "42", "--out", out.to_str().unwrap()])
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .expect("binary runs");
        assert!(output.status.success(), "optimize exited with {}", output.status);
        std::fs::read(out.join("ledger.jsonl")).unwrap()
    };
    let first = run_into("a", "2");
    let second = run_into("b", "8");
    let ok = first == second && !first.is_empty();
    verdict(
        "8 ledger-determinism",
        started,
        Duration::from_secs(60),
        ok,
        &format!("{} ledger bytes identical across 2- and 8-thread pools", first.len()),
    );
}
