//! Oracle-equivalence suite on small random instances.

use rand::Rng;

use crate::brute::{finite_difference_gradient, hidden_conditional, joint_log_partition, joint_moments, visible_pair_conditionals, MAX_JOINT_BITS};
use crate::dataset::IncompleteObservation;
use crate::error::{Error, Result};
use crate::estimators::{Kernel, SampleSet, SmciEngine};
use crate::meanfield::{fixed_point_residual, solve_clamped_mf, MeanFieldMoments, MeanFieldSettings};
use crate::oracle::{exact_clamped_moments, exact_free_moments, exact_gradient, exact_log_partition, ExactMoments, ExactSampler};
use crate::rbm::RbmParams;
use crate::rng::{RngStream, StreamRng};

/// Missing rates cycled over trials.
pub const MISSING_RATES: [f64; 3] = [0.0, 0.3, 0.8];
pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-6;
pub const SUMMAND_TOLERANCE: f64 = 1e-10;
pub const UNBIASED_TOLERANCE: f64 = 1e-12;
pub const MAX_EXHAUSTIVE_FREE: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub trials: usize,
    /// Largest error seen, in the check's own metric.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Biases and couplings drawn uniformly from `[-scale, scale]`.
pub fn random_params(n: usize, m: usize, scale: f64, rng: &mut StreamRng) -> Result<RbmParams> {
    let mut draw = |k: usize| (0..k).map(|_| rng.random_range(-scale..=scale)).collect::<Vec<f64>>();
    let b = draw(n);
    let c = draw(m);
    let w = draw(n * m);
    RbmParams::new(b, c, w)
}

/// Random data point: each visible missing with probability `p`, observed values uniform.
pub fn random_observation(n: usize, p: f64, rng: &mut StreamRng) -> IncompleteObservation {
    let bits: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
    let mask: Vec<bool> = (0..n).map(|_| rng.random::<f64>() >= p).collect();
    IncompleteObservation::from_mask(&bits, &mask).expect("binary bits")
}

fn max_moment_diff(a: &ExactMoments, b: &ExactMoments) -> f64 {
    a.ev.iter()
        .zip(&b.ev)
        .chain(a.eh.iter().zip(&b.eh))
        .chain(a.evh.iter().zip(&b.evh))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn l2(xs: impl Iterator<Item = f64>) -> f64 {
    xs.map(|x| x * x).sum::<f64>().sqrt()
}

struct Tally {
    name: &'static str,
    tolerance: f64,
    worst: f64,
    trials: usize,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Tally {
            name,
            tolerance,
            worst: 0.0,
            trials: 0,
        }
    }

    fn record(&mut self, err: f64) {
        self.trials += 1;
        // NaN must fail
        if !(err <= self.worst) {
            self.worst = if err.is_nan() { f64::INFINITY } else { err };
        }
    }

    fn finish(self) -> CheckOutcome {
        CheckOutcome {
            name: self.name,
            trials: self.trials,
            worst: self.worst,
            tolerance: self.tolerance,
            passed: self.worst <= self.tolerance,
        }
    }
}

/// Below this norm a gradient is treated as identically zero (e.g. every
/// datum fully unobserved) and the error is reported in absolute terms.
pub const ZERO_GRADIENT_NORM: f64 = 1e-9;

/// Relative L2 error of the exact gradient against central differences.
pub fn gradient_fd_error(params: &RbmParams, data: &[IncompleteObservation]) -> Result<f64> {
    let g = exact_gradient(params, data)?;
    let fd = finite_difference_gradient(params, data, FD_STEP)?;
    let diff = l2(g.iter().zip(fd.iter()).map(|(a, b)| a - b));
    let scale = g.norm().max(fd.norm());
    Ok(if scale < ZERO_GRADIENT_NORM { diff } else { diff / scale })
}

/// Largest gap between any spatial summand and its enumerated conditional expectation.
pub fn summand_error(params: &RbmParams, set: &SampleSet, kernel: Kernel) -> Result<f64> {
    let engine = SmciEngine::with_kernel(params, kernel);
    let mut worst: f64 = 0.0;
    for nu in 0..set.len() {
        let terms = engine.summands(set, nu)?;
        let v = set.clamp().full(&set.samples()[nu]);
        for (k, &i) in set.clamp().free().iter().enumerate() {
            let (ev, evh) = visible_pair_conditionals(params, &v, i)?;
            worst = worst.max((terms.ev[k] - ev).abs());
            for (j, e) in evh.iter().enumerate() {
                worst = worst.max((terms.vh(k, j) - e).abs());
            }
        }
        for j in 0..params.m() {
            worst = worst.max((terms.eh[j] - hidden_conditional(params, &v, j)?).abs());
        }
    }
    Ok(worst)
}

/// Averages every spatial summand over all free-region configurations with
/// their exact probabilities and compares with the exact moments.
pub fn exhaustive_unbiasedness_error(params: &RbmParams, obs: &IncompleteObservation) -> Result<f64> {
    let sampler = ExactSampler::clamped(params, obs)?;
    if sampler.clamp().free().len() > MAX_EXHAUSTIVE_FREE {
        return Err(Error::SizeGuard {
            bits: sampler.clamp().free().len(),
            limit: MAX_EXHAUSTIVE_FREE,
        });
    }
    let exact = exact_clamped_moments(params, obs)?;
    let engine = SmciEngine::new(params);
    let samples: Vec<Vec<u8>> = (0..sampler.num_configs()).map(|c| sampler.decode(c)).collect();
    let set = SampleSet::new(sampler.clamp().clone(), samples)?;
    let m = params.m();
    let free = sampler.clamp().free();
    let mut ev = vec![0.0; free.len()];
    let mut eh = vec![0.0; m];
    let mut evh = vec![0.0; free.len() * m];
    for code in 0..sampler.num_configs() {
        let p = sampler.probability(code);
        let t = engine.summands(&set, code)?;
        ev.iter_mut().zip(&t.ev).for_each(|(a, x)| *a += p * x);
        eh.iter_mut().zip(&t.eh).for_each(|(a, x)| *a += p * x);
        evh.iter_mut().zip(&t.evh).for_each(|(a, x)| *a += p * x);
    }
    let mut worst: f64 = 0.0;
    for (k, &i) in free.iter().enumerate() {
        worst = worst.max((ev[k] - exact.ev[i]).abs());
        for j in 0..m {
            worst = worst.max((evh[k * m + j] - exact.evh[i * m + j]).abs());
        }
    }
    for j in 0..m {
        worst = worst.max((eh[j] - exact.eh[j]).abs());
    }
    Ok(worst)
}

/// Runs every oracle comparison on `trials` random `n × m` instances.
pub fn run_oracle_checks(n: usize, m: usize, trials: usize, seed: u64) -> Result<Vec<CheckOutcome>> {
    if n == 0 || m == 0 || n + m > MAX_JOINT_BITS || trials == 0 {
        return Err(Error::Config(format!(
            "oracle checks need n, m ≥ 1, n + m ≤ {MAX_JOINT_BITS} and at least one trial"
        )));
    }
    let master = RngStream::new(seed);
    let settings = MeanFieldSettings::default();
    let mut fd = Tally::new("gradient-vs-finite-differences", FD_TOLERANCE);
    let mut part = Tally::new("partition-analytic-vs-joint", 1e-10);
    let mut clamped = Tally::new("clamped-moments-vs-joint", 1e-10);
    let mut empty = Tally::new("no-observed-equals-free", 1e-12);
    let mut summ = Tally::new("spatial-summands-vs-enumeration", SUMMAND_TOLERANCE);
    let mut unb = Tally::new("spatial-exhaustive-unbiasedness", UNBIASED_TOLERANCE);
    let mut mf = Tally::new("mean-field-fixed-point", settings.tol);
    let mut mf_empty = Tally::new("mean-field-complete-datum", 1e-12);
    for t in 0..trials {
        let mut rng = master.derive(t as u64).rng();
        let params = random_params(n, m, 1.0, &mut rng)?;
        let p = MISSING_RATES[t % MISSING_RATES.len()];
        let data: Vec<_> = (0..4).map(|_| random_observation(n, p, &mut rng)).collect();

        fd.record(gradient_fd_error(&params, &data)?);

        let z = exact_log_partition(&params)?;
        part.record((z - joint_log_partition(&params)?).abs() / z.abs().max(1.0));

        let obs = &data[0];
        clamped.record(max_moment_diff(
            &exact_clamped_moments(&params, obs)?,
            &joint_moments(&params, Some(obs))?,
        ));

        let none = IncompleteObservation::new(n, vec![], vec![])?;
        let cm = exact_clamped_moments(&params, &none)?;
        empty.record(max_moment_diff(&cm, &exact_free_moments(&params)?).max((cm.log_norm - z).abs()));

        let missing = obs.missing();
        let samples: Vec<Vec<u8>> = (0..3)
            .map(|_| (0..missing.len()).map(|_| u8::from(rng.random::<bool>())).collect())
            .collect();
        let set = SampleSet::clamped(obs, samples)?;
        let free_samples = (0..3).map(|_| (0..n).map(|_| u8::from(rng.random::<bool>())).collect()).collect();
        let free_set = SampleSet::free(n, free_samples)?;
        for kernel in [Kernel::Auto, Kernel::LogDomain] {
            summ.record(summand_error(&params, &set, kernel)?.max(summand_error(&params, &free_set, kernel)?));
        }

        let mut bounded = random_observation(n, p.max(0.3), &mut rng);
        if bounded.num_missing() > MAX_EXHAUSTIVE_FREE {
            let dense = bounded.dense();
            let mask: Vec<bool> = (0..n).map(|i| i < n - MAX_EXHAUSTIVE_FREE).collect();
            bounded = IncompleteObservation::from_mask(&dense, &mask)?;
        }
        unb.record(exhaustive_unbiasedness_error(&params, &bounded)?);

        for o in &data {
            let init = MeanFieldMoments::random(o.num_missing(), m, &mut rng);
            let sol = solve_clamped_mf(&params, o, init, &settings)?;
            if sol.converged {
                mf.record(fixed_point_residual(&params, o, &sol)?);
            }
        }
        let complete = IncompleteObservation::complete(&obs.dense())?;
        let sol = solve_clamped_mf(&params, &complete, MeanFieldMoments::random(0, m, &mut rng), &settings)?;
        let exact = exact_clamped_moments(&params, &complete)?;
        mf_empty.record(sol.mh.iter().zip(&exact.eh).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    Ok(vec![
        fd.finish(),
        part.finish(),
        clamped.finish(),
        empty.finish(),
        summ.finish(),
        unb.finish(),
        mf.finish(),
        mf_empty.finish(),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_small_instances() {
        let out = run_oracle_checks(4, 3, 6, 7).unwrap();
        for o in &out {
            assert!(o.passed, "{o:?}");
            assert!(o.trials > 0, "{o:?}");
        }
    }

    #[test]
    fn bad_sizes() {
        assert!(run_oracle_checks(0, 2, 1, 0).is_err());
        assert!(run_oracle_checks(20, 5, 1, 0).is_err());
    }
}
