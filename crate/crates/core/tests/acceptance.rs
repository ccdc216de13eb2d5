//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::f64::consts::LN_2;
use std::process::Command;
use std::time::Instant;

use rand::Rng;

use rbm_missing::ais::{ais_log_partition, AisConfig};
use rbm_missing::bench::variance_bench;
use rbm_missing::check::{exhaustive_unbiasedness_error, gradient_fd_error, random_observation, random_params, summand_error};
use rbm_missing::dataset::apply_mask;
use rbm_missing::estimators::{Kernel, SampleSet};
use rbm_missing::format::matrix;
use rbm_missing::meanfield::{fixed_point_residual, solve_clamped_mf, MeanFieldMoments, MeanFieldSettings};
use rbm_missing::oracle::{exact_clamped_moments, exact_log_partition};
use rbm_missing::trainer::{train, EvalMethod, EvalSets, Method, Split, TrainConfig, Trainer};
use rbm_missing::{IncompleteObservation, RbmParams, RngStream};

// Tolerances and sizes fixed by the criteria.
const C1_INSTANCES: usize = 20;
const C1_MAX_SIZE: usize = 6;
const C1_RATES: [f64; 3] = [0.0, 0.3, 0.8];
const C1_TOL: f64 = 1e-6;
const C2_MAX_HIDDEN: usize = 10;
const C2_TOL: f64 = 1e-10;
const C3_SETS: usize = 200;
const C3_K: usize = 100;
const C3_SLACK: f64 = 1.05;
const C4_MAX_FREE: usize = 8;
const C4_TOL: f64 = 1e-12;
const C5_FIXED_POINT_TOL: f64 = 1e-6;
const C5_COMPLETE_TOL: f64 = 1e-12;
const C6_ZERO_TOL: f64 = 1e-12;
const C6_N: usize = 8;
const C6_M: usize = 6;
const C6_TEMPERATURES: usize = 1000;
const C6_RUNS: usize = 100;
const C6_SIGMAS: f64 = 3.0;
const C6_REPS: usize = 10;
const C6_REQUIRED: usize = 9;
const C7_N: usize = 16;
const C7_M: usize = 8;
const C7_DATA: usize = 200;
const C7_RATES: [f64; 3] = [0.3, 0.5, 0.8];
const C7_SEEDS: u64 = 5;
const C7_CLAMPED_SAMPLES: usize = 1;
const C7_CLAMPED_STEPS: usize = 16;
const C7_FREE_SAMPLES: usize = 32;
const C7_FREE_STEPS: usize = 16;
const C7_AFTER_EPOCH: usize = 5;
const C8_MAX_RATIO: f64 = 1.5;

// Choices left open by the criteria.
const PLANTED_SCALE: f64 = 2.0;
const PLANTED_SEED: u64 = 100;
const C7_BATCH: usize = 20;
const C7_EPOCHS: usize = 50;
const C7_LEARNING_RATE: f64 = 0.01;
const C7_EVAL_EVERY: usize = 5;
const C8_EPOCHS: usize = 10;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn c1_gradient() -> Verdict {
    let master = RngStream::new(1);
    let mut worst: f64 = 0.0;
    for t in 0..C1_INSTANCES {
        let mut rng = master.derive(t as u64).rng();
        let n = rng.random_range(1..=C1_MAX_SIZE);
        let m = rng.random_range(1..=C1_MAX_SIZE);
        let params = random_params(n, m, 1.0, &mut rng).unwrap();
        let p = C1_RATES[t % C1_RATES.len()];
        let data: Vec<_> = (0..5).map(|_| random_observation(n, p, &mut rng)).collect();
        worst = worst.max(gradient_fd_error(&params, &data).unwrap());
    }
    verdict(worst <= C1_TOL, format!("{C1_INSTANCES} instances, worst relative error {worst:.2e} (tol {C1_TOL:.0e})"))
}

fn c2_summands() -> Verdict {
    let master = RngStream::new(2);
    let mut worst: f64 = 0.0;
    let mut samples_checked = 0;
    for t in 0..30 {
        let mut rng = master.derive(t).rng();
        let n = rng.random_range(1..=8);
        let m = rng.random_range(1..=C2_MAX_HIDDEN);
        let scale = [0.5, 2.0, 6.0][t as usize % 3];
        let params = random_params(n, m, scale, &mut rng).unwrap();
        let obs = random_observation(n, 0.5, &mut rng);
        let width = obs.num_missing();
        let clamped: Vec<Vec<u8>> = (0..4).map(|_| (0..width).map(|_| u8::from(rng.random::<bool>())).collect()).collect();
        let free: Vec<Vec<u8>> = (0..4).map(|_| (0..n).map(|_| u8::from(rng.random::<bool>())).collect()).collect();
        for set in [SampleSet::clamped(&obs, clamped).unwrap(), SampleSet::free(n, free).unwrap()] {
            samples_checked += set.len();
            for kernel in [Kernel::Auto, Kernel::LogDomain] {
                worst = worst.max(summand_error(&params, &set, kernel).unwrap());
            }
        }
    }
    verdict(worst <= C2_TOL, format!("{samples_checked} samples, m ≤ {C2_MAX_HIDDEN}, worst {worst:.2e} (tol {C2_TOL:.0e})"))
}

fn c3_variance() -> Verdict {
    let params = RbmParams::new(
        vec![0.3, -0.5, 0.2, 0.4],
        vec![-0.2, 0.3, 0.1],
        vec![0.9, -0.6, 0.4, -0.7, 0.5, 0.8, 0.3, -0.9, 0.6, 0.5, 0.7, -0.4],
    )
    .unwrap();
    let obs = IncompleteObservation::new(4, vec![1], vec![1]).unwrap();
    let mut worst: f64 = 0.0;
    let mut moments = 0;
    let mut violations = 0;
    for (k, o) in [None, Some(&obs)].into_iter().enumerate() {
        let rep = variance_bench(&params, o, C3_K, C3_SETS, RngStream::new(30 + k as u64)).unwrap();
        for r in &rep.rows {
            moments += 1;
            if r.var_smci > C3_SLACK * r.var_mci {
                violations += 1;
            }
            if r.var_mci > 0.0 {
                worst = worst.max(r.var_smci / r.var_mci);
            }
        }
    }
    verdict(
        violations == 0,
        format!("{moments} moments, {violations} violations, {C3_SETS} sets of K={C3_K}, worst var ratio smci/mci {worst:.3} (limit {C3_SLACK})"),
    )
}

fn c4_unbiased() -> Verdict {
    let master = RngStream::new(4);
    let mut worst: f64 = 0.0;
    for t in 0..6 {
        let mut rng = master.derive(t).rng();
        let (n, m) = [(8, 4), (10, 3), (6, 6)][t as usize % 3];
        let params = random_params(n, m, 1.5, &mut rng).unwrap();
        let bits: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
        let mask: Vec<bool> = (0..n).map(|i| i + C4_MAX_FREE < n).collect();
        let obs = IncompleteObservation::from_mask(&bits, &mask).unwrap();
        worst = worst.max(exhaustive_unbiasedness_error(&params, &obs).unwrap());
    }
    verdict(worst <= C4_TOL, format!("|A| ≤ {C4_MAX_FREE}, worst {worst:.2e} (tol {C4_TOL:.0e})"))
}

fn c5_mean_field() -> Verdict {
    let settings = MeanFieldSettings::default();
    let master = RngStream::new(5);
    let (mut worst_fp, mut worst_complete): (f64, f64) = (0.0, 0.0);
    let (mut converged, mut total) = (0, 0);
    for t in 0..200 {
        let mut rng = master.derive(t).rng();
        let n = rng.random_range(1..=12);
        let m = rng.random_range(1..=8);
        let params = random_params(n, m, 1.0, &mut rng).unwrap();
        let obs = random_observation(n, 0.5, &mut rng);
        let sol = solve_clamped_mf(&params, &obs, MeanFieldMoments::random(obs.num_missing(), m, &mut rng), &settings).unwrap();
        total += 1;
        if sol.converged {
            converged += 1;
            worst_fp = worst_fp.max(fixed_point_residual(&params, &obs, &sol).unwrap());
        }
        let complete = IncompleteObservation::complete(&obs.dense()).unwrap();
        let sol = solve_clamped_mf(&params, &complete, MeanFieldMoments::random(0, m, &mut rng), &settings).unwrap();
        let exact = exact_clamped_moments(&params, &complete).unwrap();
        for (a, b) in sol.mh.iter().zip(&exact.eh) {
            worst_complete = worst_complete.max((a - b).abs());
        }
    }
    verdict(
        worst_fp <= C5_FIXED_POINT_TOL && worst_complete <= C5_COMPLETE_TOL,
        format!(
            "{converged}/{total} converged, worst residual {worst_fp:.2e} (tol {C5_FIXED_POINT_TOL:.0e}); M=∅ worst {worst_complete:.2e} (tol {C5_COMPLETE_TOL:.0e})"
        ),
    )
}

fn c6_ais() -> Verdict {
    let zero = RbmParams::zeros(C6_N, C6_M);
    let cfg = AisConfig {
        num_temperatures: C6_TEMPERATURES,
        num_runs: C6_RUNS,
    };
    let z0 = ais_log_partition(&zero, &cfg, RngStream::new(60)).unwrap();
    let zero_err = (z0.log_z - (C6_N + C6_M) as f64 * LN_2).abs();
    let mut within = 0;
    let mut worst_sigma: f64 = 0.0;
    for r in 0..C6_REPS as u64 {
        let mut rng = RngStream::new(600 + r).rng();
        let params = random_params(C6_N, C6_M, 1.0, &mut rng).unwrap();
        let exact = exact_log_partition(&params).unwrap();
        let est = ais_log_partition(&params, &cfg, RngStream::new(700 + r)).unwrap();
        let sigmas = (est.log_z - exact).abs() / est.std_err;
        worst_sigma = worst_sigma.max(sigmas);
        if sigmas <= C6_SIGMAS {
            within += 1;
        }
    }
    verdict(
        zero_err <= C6_ZERO_TOL && z0.log_weight_variance == 0.0 && within >= C6_REQUIRED,
        format!(
            "zero model error {zero_err:.1e}; {within}/{C6_REPS} within {C6_SIGMAS} SE (need {C6_REQUIRED}), worst {worst_sigma:.2} SE"
        ),
    )
}

fn c7_config(method: Method, seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: C7_BATCH,
        epochs: C7_EPOCHS,
        clamped_samples: C7_CLAMPED_SAMPLES,
        clamped_steps: C7_CLAMPED_STEPS,
        free_samples: C7_FREE_SAMPLES,
        free_steps: C7_FREE_STEPS,
        learning_rate: C7_LEARNING_RATE,
        eval_every: C7_EVAL_EVERY,
        eval: EvalMethod::Exact,
        ..TrainConfig::new(method, C7_M, seed)
    }
}

fn c7_tables() -> Verdict {
    let (_, matrix) = common::planted(C7_N, C7_M, C7_DATA, PLANTED_SCALE, PLANTED_SEED);
    let eval = EvalSets {
        train: common::complete(&matrix),
        test: None,
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for p in C7_RATES {
        let mut curves = [Vec::<(usize, f64)>::new(), Vec::new()];
        for seed in 0..C7_SEEDS {
            let data = apply_mask(&matrix, p, 1000 + seed).unwrap();
            for (k, method) in [Method::Proposed, Method::LossyCd].into_iter().enumerate() {
                let (_, log) = train(&c7_config(method, seed), &data, Some(&eval), None).unwrap();
                let series = log.series(Split::Train);
                if curves[k].is_empty() {
                    curves[k] = series.iter().map(|&(e, _)| (e, 0.0)).collect();
                }
                for (acc, &(_, l)) in curves[k].iter_mut().zip(&series) {
                    acc.1 += l / C7_SEEDS as f64;
                }
            }
        }
        let (prop, lossy) = (&curves[0], &curves[1]);
        let final_ok = prop.last().unwrap().1 >= lossy.last().unwrap().1;
        let trend_ok = prop
            .iter()
            .zip(lossy)
            .filter(|(a, _)| a.0 > C7_AFTER_EPOCH)
            .all(|(a, b)| a.1 >= b.1);
        ok &= final_ok && trend_ok;
        parts.push(format!(
            "p={p}: proposed {:.3} vs lossy-cd {:.3}{}",
            prop.last().unwrap().1,
            lossy.last().unwrap().1,
            if trend_ok { "" } else { " (trend violated)" }
        ));
    }
    verdict(ok, parts.join("; "))
}

fn c8_cost() -> Verdict {
    let (_, matrix) = common::planted(C7_N, C7_M, C7_DATA, PLANTED_SCALE, PLANTED_SEED);
    let mut ok = true;
    let mut parts = Vec::new();
    for p in C7_RATES {
        let data = apply_mask(&matrix, p, 1000).unwrap();
        let mut prop = Trainer::new(&c7_config(Method::Proposed, 0), &data).unwrap();
        let mut lossy = Trainer::new(&c7_config(Method::LossyCd, 0), &data).unwrap();
        let (mut tp, mut tl) = (0.0, 0.0);
        // interleaved so drift in machine load hits both methods alike
        for _ in 0..C8_EPOCHS {
            let s = Instant::now();
            prop.run_epoch().unwrap();
            tp += s.elapsed().as_secs_f64();
            let s = Instant::now();
            lossy.run_epoch().unwrap();
            tl += s.elapsed().as_secs_f64();
        }
        let updates = prop.updates() as f64;
        let ratio = tp / tl;
        ok &= ratio <= C8_MAX_RATIO;
        parts.push(format!("p={p}: {:.0} µs vs {:.0} µs per update, ratio {ratio:.2}", 1e6 * tp / updates, 1e6 * tl / updates));
    }
    verdict(ok, format!("{} (limit {C8_MAX_RATIO})", parts.join("; ")))
}

fn c9_determinism() -> Verdict {
    let (_, matrix) = common::planted(C7_N, C7_M, C7_DATA, PLANTED_SCALE, PLANTED_SEED);
    let config = format!(
        "[data]\ntrain = \"data.csv\"\n\n[output]\ncheckpoint = \"model.rbmc\"\nmetrics = \"metrics.csv\"\n\n[train]\nmethod = \"proposed\"\nhidden = {C7_M}\nseed = 42\nmissing_prob = 0.5\nbatch_size = {C7_BATCH}\nepochs = 6\nfree_samples = {C7_FREE_SAMPLES}\nlearning_rate = {C7_LEARNING_RATE}\neval_every = 2\n"
    );
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        matrix::write_csv(&dir.path().join("data.csv"), &matrix).unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(&cfg, &config).unwrap();
        let status = Command::new(env!("CARGO_BIN_EXE_rbm-missing"))
            .args(["train", "--config", cfg.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
        (
            std::fs::read(dir.path().join("model.rbmc")).unwrap(),
            std::fs::read(dir.path().join("metrics.csv")).unwrap(),
        )
    };
    let (a, b) = (run(), run());
    verdict(
        a == b && !a.0.is_empty() && !a.1.is_empty(),
        format!("checkpoint {} bytes, metrics {} bytes, identical: {}", a.0.len(), a.1.len(), a == b),
    )
}

fn main() {
    // libtest flags (e.g. --nocapture, filters) are accepted and ignored
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("1 oracle gradient vs finite differences", c1_gradient),
        ("2 spatial summands vs enumeration", c2_summands),
        ("3 variance ordering", c3_variance),
        ("4 exhaustive unbiasedness", c4_unbiased),
        ("5 mean-field fixed point", c5_mean_field),
        ("6 AIS sanity", c6_ais),
        ("7 proposed vs lossy-cd on planted data", c7_tables),
        ("8 per-update cost ratio", c8_cost),
        ("9 CLI training determinism", c9_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let v = f();
        if !v.passed {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.1}s]",
            if v.passed { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
