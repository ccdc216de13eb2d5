//! Exact inference by enumeration for small models.
//!
//! The hidden layer is always summed analytically,
//! `Σ_h e^{-E(v,h)} = exp(Σ_i b_i v_i + Σ_j softplus(τ_j(v)))`,
//! so only the free visible configurations are enumerated. Enumeration runs
//! in fixed-size blocks that may execute in parallel; block results are
//! combined in block order, so results do not depend on the thread count.

use rand::Rng;
use rayon::prelude::*;

use crate::dataset::IncompleteObservation;
use crate::error::{Error, Result};
use crate::math::{sigmoid, LogSumExp};
use crate::rbm::{add_row, Clamp, Gradient, RbmParams};

/// Largest number of visible bits the oracle will enumerate.
pub const MAX_ENUMERATION_BITS: usize = 24;

const BLOCK_BITS: usize = 12;

/// Exact first and second moments. `ev` and `evh` cover every visible;
/// `log_norm` is `ln Z` for free moments and the clamped normalizer
/// `ln Σ_{v_M} Σ_h e^{-E}` for clamped moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMoments {
    pub ev: Vec<f64>,
    pub eh: Vec<f64>,
    pub evh: Vec<f64>,
    pub log_norm: f64,
}

fn guard(bits: usize) -> Result<()> {
    if bits > MAX_ENUMERATION_BITS {
        return Err(Error::SizeGuard {
            bits,
            limit: MAX_ENUMERATION_BITS,
        });
    }
    Ok(())
}

/// Walks the configurations `code ∈ [start, end)` of the free region,
/// handing the full visible vector, its hidden fields and its log weight to `f`.
fn walk_block(
    params: &RbmParams,
    clamp: &Clamp,
    base_fields: &[f64],
    start: u64,
    end: u64,
    mut f: impl FnMut(&[u8], &[f64], f64),
) {
    let free = clamp.free();
    let mut v = clamp.base().to_vec();
    let mut fields = vec![0.0; params.m()];
    for code in start..end {
        fields.copy_from_slice(base_fields);
        for (k, &i) in free.iter().enumerate() {
            let bit = ((code >> k) & 1) as u8;
            v[i] = bit;
            if bit != 0 {
                add_row(&mut fields, params.row(i));
            }
        }
        let lw = params.log_weight_from_fields(&v, &fields);
        f(&v, &fields, lw);
    }
}

fn blocks(bits: usize) -> Vec<(u64, u64)> {
    let total = 1u64 << bits;
    let size = 1u64 << bits.min(BLOCK_BITS);
    (0..total / size).map(|b| (b * size, (b + 1) * size)).collect()
}

fn clamped_log_norm(params: &RbmParams, clamp: &Clamp) -> Result<f64> {
    clamp.check(params)?;
    guard(clamp.free().len())?;
    let base = clamp.base_hidden_fields(params);
    let parts: Vec<LogSumExp> = blocks(clamp.free().len())
        .into_par_iter()
        .map(|(s, e)| {
            let mut acc = LogSumExp::new();
            walk_block(params, clamp, &base, s, e, |_, _, lw| acc.push(lw));
            acc
        })
        .collect();
    let mut total = LogSumExp::new();
    for p in parts {
        let v = p.value();
        if v > f64::NEG_INFINITY {
            total.push(v);
        }
    }
    Ok(total.value())
}

fn moments(params: &RbmParams, clamp: &Clamp) -> Result<ExactMoments> {
    let log_norm = clamped_log_norm(params, clamp)?;
    let (n, m) = (params.n(), params.m());
    let base = clamp.base_hidden_fields(params);
    let parts: Vec<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> = blocks(clamp.free().len())
        .into_par_iter()
        .map(|(s, e)| {
            let mut ev = vec![0.0; n];
            let mut eh = vec![0.0; m];
            let mut evh = vec![0.0; n * m];
            let mut ph = vec![0.0; m];
            let mut mass = 0.0;
            walk_block(params, clamp, &base, s, e, |v, fields, lw| {
                let p = (lw - log_norm).exp();
                mass += p;
                for (q, &t) in ph.iter_mut().zip(fields) {
                    *q = p * sigmoid(t);
                }
                for (a, &q) in eh.iter_mut().zip(&ph) {
                    *a += q;
                }
                for (i, &vi) in v.iter().enumerate() {
                    if vi != 0 {
                        ev[i] += p;
                        add_row(&mut evh[i * m..(i + 1) * m], &ph);
                    }
                }
            });
            (mass, ev, eh, evh)
        })
        .collect();
    let mut ev = vec![0.0; n];
    let mut eh = vec![0.0; m];
    let mut evh = vec![0.0; n * m];
    let mut mass = 0.0;
    for (z, a, b, c) in parts {
        mass += z;
        add_row(&mut ev, &a);
        add_row(&mut eh, &b);
        add_row(&mut evh, &c);
    }
    // renormalize by the accumulated mass so that the rounding of
    // `lw - log_norm` cancels between numerator and denominator
    ev.iter_mut().chain(&mut eh).chain(&mut evh).for_each(|x| *x /= mass);
    // fixed visibles are exact: v_i = d_i with probability one
    let free = clamp.free();
    let mut is_free = vec![false; n];
    free.iter().for_each(|&i| is_free[i] = true);
    for i in 0..n {
        if !is_free[i] {
            let d = f64::from(clamp.base()[i]);
            ev[i] = d;
            for j in 0..m {
                evh[i * m + j] = d * eh[j];
            }
        }
    }
    Ok(ExactMoments {
        ev,
        eh,
        evh,
        log_norm,
    })
}

/// `ln Z_θ`.
pub fn exact_log_partition(params: &RbmParams) -> Result<f64> {
    clamped_log_norm(params, &Clamp::all_free(params.n()))
}

/// Moments under the joint distribution `P_θ(v, h)`.
pub fn exact_free_moments(params: &RbmParams) -> Result<ExactMoments> {
    moments(params, &Clamp::all_free(params.n()))
}

/// Moments under the clamped distribution `P_θ(v_M, h | d)`.
pub fn exact_clamped_moments(
    params: &RbmParams,
    obs: &IncompleteObservation,
) -> Result<ExactMoments> {
    moments(params, &Clamp::from_observation(obs))
}

/// Marginal log-likelihood of an incomplete dataset, averaged over data.
pub fn exact_log_likelihood(params: &RbmParams, data: &[IncompleteObservation]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Domain("log-likelihood of an empty dataset".into()));
    }
    let log_z = exact_log_partition(params)?;
    let mut total = 0.0;
    for obs in data {
        total += clamped_log_norm(params, &Clamp::from_observation(obs))?;
    }
    Ok(total / data.len() as f64 - log_z)
}

/// Gradient of [`exact_log_likelihood`]: mean clamped moments minus free moments.
pub fn exact_gradient(params: &RbmParams, data: &[IncompleteObservation]) -> Result<Gradient> {
    if data.is_empty() {
        return Err(Error::Domain("gradient of an empty dataset".into()));
    }
    let free = exact_free_moments(params)?;
    let mut g = Gradient::zeros(params.n(), params.m());
    for obs in data {
        let cm = exact_clamped_moments(params, obs)?;
        add_row(&mut g.b, &cm.ev);
        add_row(&mut g.c, &cm.eh);
        add_row(&mut g.w, &cm.evh);
    }
    g.scale(1.0 / data.len() as f64);
    for (a, f) in g.b.iter_mut().zip(&free.ev) {
        *a -= f;
    }
    for (a, f) in g.c.iter_mut().zip(&free.eh) {
        *a -= f;
    }
    for (a, f) in g.w.iter_mut().zip(&free.evh) {
        *a -= f;
    }
    Ok(g)
}

/// Draws exact i.i.d. samples from `P_θ(v)` (or the clamped marginal) by
/// inverting the enumerated cumulative distribution.
#[derive(Debug, Clone)]
pub struct ExactSampler {
    clamp: Clamp,
    cdf: Vec<f64>,
}

impl ExactSampler {
    pub fn free(params: &RbmParams) -> Result<Self> {
        Self::new(params, Clamp::all_free(params.n()))
    }

    pub fn clamped(params: &RbmParams, obs: &IncompleteObservation) -> Result<Self> {
        Self::new(params, Clamp::from_observation(obs))
    }

    fn new(params: &RbmParams, clamp: Clamp) -> Result<Self> {
        let log_norm = clamped_log_norm(params, &clamp)?;
        let base = clamp.base_hidden_fields(params);
        let total = 1u64 << clamp.free().len();
        let mut cdf = Vec::with_capacity(total as usize);
        let mut acc = 0.0;
        walk_block(params, &clamp, &base, 0, total, |_, _, lw| {
            acc += (lw - log_norm).exp();
            cdf.push(acc);
        });
        Ok(ExactSampler { clamp, cdf })
    }

    /// Probability of free-region configuration `code` (bit k = k-th free visible).
    pub fn probability(&self, code: usize) -> f64 {
        let prev = if code == 0 { 0.0 } else { self.cdf[code - 1] };
        (self.cdf[code] - prev) / self.cdf[self.cdf.len() - 1]
    }

    /// Free-region configuration encoded as `code`.
    pub fn decode(&self, code: usize) -> Vec<u8> {
        (0..self.clamp.free().len())
            .map(|k| ((code >> k) & 1) as u8)
            .collect()
    }

    pub fn num_configs(&self) -> usize {
        self.cdf.len()
    }

    pub fn clamp(&self) -> &Clamp {
        &self.clamp
    }

    /// One draw of the free-region configuration.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u8> {
        let total = self.cdf[self.cdf.len() - 1];
        let u = rng.random::<f64>() * total;
        let code = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        self.decode(code)
    }

    /// A full visible vector and a hidden vector drawn from `P(h | v)`.
    pub fn draw_joint<R: Rng + ?Sized>(&self, params: &RbmParams, rng: &mut R) -> (Vec<u8>, Vec<u8>) {
        let v = self.clamp.full(&self.draw(rng));
        let mut fields = vec![0.0; params.m()];
        params.hidden_fields_into(&v, &mut fields);
        let h = fields
            .iter()
            .map(|&t| u8::from(rng.random::<f64>() < sigmoid(t)))
            .collect();
        (v, h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn zero_params_partition() {
        let p = RbmParams::zeros(2, 2);
        assert!((exact_log_partition(&p).unwrap() - 4.0 * LN_2).abs() < 1e-14);
    }

    #[test]
    fn one_by_one_partition() {
        let p = RbmParams::new(vec![1.0], vec![1.0], vec![1.0]).unwrap();
        let e = std::f64::consts::E;
        let expected = (1.0 + 2.0 * e + e.powi(3)).ln();
        assert!((exact_log_partition(&p).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 3.277_978_37).abs() < 1e-8);
    }

    #[test]
    fn zero_params_moments() {
        let m = exact_free_moments(&RbmParams::zeros(3, 2)).unwrap();
        assert!(m.ev.iter().chain(&m.eh).all(|&x| (x - 0.5).abs() < 1e-15));
        assert!(m.evh.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn saturated_visible_bias() {
        let mut b = vec![0.0; 3];
        b[1] = 50.0;
        let p = RbmParams::new(b, vec![0.3, -0.2], vec![0.0; 6]).unwrap();
        let m = exact_free_moments(&p).unwrap();
        assert!((m.ev[1] - 1.0).abs() < 1e-15, "{}", m.ev[1] - 1.0);
        for j in 0..2 {
            assert!((m.evh[2 + j] - m.eh[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn complete_observation_moments_are_conditionals() {
        let p = RbmParams::new(vec![0.2, -0.1, 0.4], vec![0.5, -1.0], vec![0.3, -0.7, 1.1, 0.2, -0.4, 0.9])
            .unwrap();
        let d = [1u8, 0, 1];
        let obs = IncompleteObservation::complete(&d).unwrap();
        let cm = exact_clamped_moments(&p, &obs).unwrap();
        let eh = p.conditional_means_hidden(&d).unwrap();
        for j in 0..2 {
            assert!((cm.eh[j] - eh[j]).abs() < 1e-15);
        }
        assert_eq!(cm.ev, vec![1.0, 0.0, 1.0]);
        for i in 0..3 {
            for j in 0..2 {
                assert!((cm.evh[i * 2 + j] - f64::from(d[i]) * eh[j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn decoupled_missing_visibles() {
        let p = RbmParams::new(vec![0.7, -1.3, 0.2], vec![0.5, 0.1], vec![0.0; 6]).unwrap();
        for d in [0u8, 1] {
            let obs = IncompleteObservation::new(3, vec![2], vec![d]).unwrap();
            let cm = exact_clamped_moments(&p, &obs).unwrap();
            assert!((cm.ev[0] - sigmoid(0.7)).abs() < 1e-15);
            assert!((cm.ev[1] - sigmoid(-1.3)).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_model_likelihood_counts_observed_bits() {
        let p = RbmParams::zeros(4, 3);
        let data = vec![
            IncompleteObservation::new(4, vec![0, 1], vec![1, 0]).unwrap(),
            IncompleteObservation::new(4, vec![0, 1, 2, 3], vec![1, 1, 0, 1]).unwrap(),
            IncompleteObservation::new(4, vec![], vec![]).unwrap(),
        ];
        let ll = exact_log_likelihood(&p, &data).unwrap();
        let expected = -(2.0 + 4.0 + 0.0) / 3.0 * LN_2;
        assert!((ll - expected).abs() < 1e-13);
    }

    #[test]
    fn peaked_model_likelihood_near_zero() {
        let p = RbmParams::new(vec![20.0, -20.0, 20.0], vec![-20.0], vec![0.0; 3]).unwrap();
        let data = vec![IncompleteObservation::complete(&[1, 0, 1]).unwrap()];
        let ll = exact_log_likelihood(&p, &data).unwrap();
        assert!(ll < 0.0 && ll > -1e-6);
    }

    #[test]
    fn size_guard_is_an_error() {
        let p = RbmParams::zeros(MAX_ENUMERATION_BITS + 1, 1);
        assert!(matches!(exact_log_partition(&p), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn exact_sampler_probabilities_sum_to_one() {
        let p = RbmParams::new(vec![0.2, -0.1, 0.4], vec![0.5, -1.0], vec![0.3, -0.7, 1.1, 0.2, -0.4, 0.9])
            .unwrap();
        let s = ExactSampler::free(&p).unwrap();
        let total: f64 = (0..s.num_configs()).map(|c| s.probability(c)).sum();
        assert!((total - 1.0).abs() < 1e-14);
        let lz = exact_log_partition(&p).unwrap();
        for c in 0..s.num_configs() {
            let v = s.decode(c);
            let lw = p.log_marginal_weight(&v).unwrap();
            assert!(((lw - lz).exp() - s.probability(c)).abs() < 1e-14);
        }
    }
}
