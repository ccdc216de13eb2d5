//! Annealed importance sampling for `ln Z` and complete-data log-likelihood.
//!
//! The base distribution is the same machine with all couplings switched
//! off, so `ln Z_0 = Σ_i softplus(b_i) + Σ_j softplus(c_j)` and exact samples
//! are independent Bernoulli draws. Intermediate distributions scale the
//! couplings by `β_k = k / (T - 1)`; hidden units are summed out of every
//! importance weight, and one blocked Gibbs sweep at `β_k` moves the chain.

use rand::Rng;
use rayon::prelude::*;

use crate::dataset::IncompleteObservation;
use crate::error::{Error, Result};
use crate::math::{log_mean_exp, sigmoid, softplus};
use crate::rbm::{add_row, RbmParams};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AisConfig {
    pub num_temperatures: usize,
    pub num_runs: usize,
}

impl AisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_temperatures < 2 || self.num_runs == 0 {
            return Err(Error::Config(format!(
                "AIS needs at least 2 temperatures and 1 run, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AisEstimate {
    pub log_z: f64,
    /// Sample variance of the log importance weights.
    pub log_weight_variance: f64,
    /// Delta-method standard error of `log_z`.
    pub std_err: f64,
    pub log_weights: Vec<f64>,
}

/// `b·v + Σ_j softplus(c_j + β x_j)` with `x = vW`.
fn log_f(params: &RbmParams, v: &[u8], x: &[f64], beta: f64) -> f64 {
    let bv: f64 = params
        .visible_bias()
        .iter()
        .zip(v)
        .filter(|(_, &vi)| vi != 0)
        .map(|(b, _)| b)
        .sum();
    bv + params
        .hidden_bias()
        .iter()
        .zip(x)
        .map(|(&c, &xj)| softplus(c + beta * xj))
        .sum::<f64>()
}

fn coupling_input(params: &RbmParams, v: &[u8], x: &mut [f64]) {
    x.iter_mut().for_each(|a| *a = 0.0);
    for (i, &vi) in v.iter().enumerate() {
        if vi != 0 {
            add_row(x, params.row(i));
        }
    }
}

fn run(params: &RbmParams, t: usize, stream: RngStream) -> f64 {
    let (n, m) = (params.n(), params.m());
    let mut rng = stream.rng();
    let mut v: Vec<u8> = params
        .visible_bias()
        .iter()
        .map(|&b| u8::from(rng.random::<f64>() < sigmoid(b)))
        .collect();
    let mut h = vec![0u8; m];
    let mut x = vec![0.0; m];
    coupling_input(params, &v, &mut x);
    let mut log_w = 0.0;
    let scale = 1.0 / (t - 1) as f64;
    for k in 1..t {
        let (prev, beta) = ((k - 1) as f64 * scale, k as f64 * scale);
        log_w += log_f(params, &v, &x, beta) - log_f(params, &v, &x, prev);
        if k + 1 == t {
            break;
        }
        for (hj, (&c, &xj)) in h.iter_mut().zip(params.hidden_bias().iter().zip(&x)) {
            *hj = u8::from(rng.random::<f64>() < sigmoid(c + beta * xj));
        }
        for i in 0..n {
            let row = params.row(i);
            let s: f64 = row.iter().zip(&h).filter(|(_, &hj)| hj != 0).map(|(w, _)| w).sum();
            v[i] = u8::from(rng.random::<f64>() < sigmoid(params.visible_bias()[i] + beta * s));
        }
        coupling_input(params, &v, &mut x);
    }
    log_w
}

/// AIS estimate of `ln Z_θ` from `num_runs` independent annealing chains.
pub fn ais_log_partition(params: &RbmParams, cfg: &AisConfig, stream: RngStream) -> Result<AisEstimate> {
    cfg.validate()?;
    let log_weights: Vec<f64> = (0..cfg.num_runs)
        .into_par_iter()
        .map(|r| run(params, cfg.num_temperatures, stream.derive(r as u64)))
        .collect();
    let log_z0: f64 = params
        .visible_bias()
        .iter()
        .chain(params.hidden_bias())
        .map(|&a| softplus(a))
        .sum();
    let r = log_weights.len() as f64;
    let mean_lw = log_weights.iter().sum::<f64>() / r;
    let log_weight_variance = if log_weights.len() > 1 {
        log_weights.iter().map(|l| (l - mean_lw).powi(2)).sum::<f64>() / (r - 1.0)
    } else {
        0.0
    };
    let mx = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = log_weights.iter().map(|l| (l - mx).exp()).collect();
    let mean_w = scaled.iter().sum::<f64>() / r;
    let std_err = if log_weights.len() > 1 {
        let var_w = scaled.iter().map(|w| (w - mean_w).powi(2)).sum::<f64>() / (r - 1.0);
        var_w.sqrt() / (r.sqrt() * mean_w)
    } else {
        f64::INFINITY
    };
    Ok(AisEstimate {
        log_z: log_z0 + log_mean_exp(&log_weights),
        log_weight_variance,
        std_err,
        log_weights,
    })
}

/// Average `ln P(d)` over fully observed data, given `ln Z`.
pub fn complete_data_log_likelihood(params: &RbmParams, data: &[IncompleteObservation], log_z: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Domain("no data to evaluate".into()));
    }
    let mut total = 0.0;
    for (mu, obs) in data.iter().enumerate() {
        if !obs.is_complete() {
            return Err(Error::InvalidObservation(format!(
                "datum {mu} has {} missing entries",
                obs.num_missing()
            )));
        }
        total += params.log_marginal_weight(&obs.dense())?;
    }
    Ok(total / data.len() as f64 - log_z)
}
