//! Slow reference computations by direct enumeration of joint states.
//!
//! Nothing here uses the analytic hidden sum, the SMCI closed forms or the
//! mean-field updates; every quantity is a weighted sum of `e^{-E(v,h)}`
//! over explicit `(v, h)` configurations. These routines back the
//! `oracle-check` command and the equivalence tests.

use crate::dataset::IncompleteObservation;
use crate::error::{Error, Result};
use crate::oracle::{exact_log_likelihood, ExactMoments};
use crate::rbm::{Gradient, RbmParams};

pub const MAX_JOINT_BITS: usize = 22;

fn bits(code: u64, len: usize) -> Vec<u8> {
    (0..len).map(|k| ((code >> k) & 1) as u8).collect()
}

fn guard(bits: usize) -> Result<()> {
    if bits > MAX_JOINT_BITS {
        return Err(Error::SizeGuard {
            bits,
            limit: MAX_JOINT_BITS,
        });
    }
    Ok(())
}

/// `ln Σ_{v,h} e^{-E(v,h)}` over all `2^{n+m}` joint states.
pub fn joint_log_partition(params: &RbmParams) -> Result<f64> {
    Ok(joint_moments(params, None)?.log_norm)
}

/// Moments under the joint, or under the clamped distribution when `obs` is given.
pub fn joint_moments(params: &RbmParams, obs: Option<&IncompleteObservation>) -> Result<ExactMoments> {
    let (n, m) = (params.n(), params.m());
    let (missing, mut v) = match obs {
        Some(o) => (o.missing(), o.dense()),
        None => ((0..n).collect::<Vec<_>>(), vec![0u8; n]),
    };
    guard(missing.len() + m)?;
    let mut states = Vec::new();
    for vc in 0..(1u64 << missing.len()) {
        for (k, &i) in missing.iter().enumerate() {
            v[i] = ((vc >> k) & 1) as u8;
        }
        for hc in 0..(1u64 << m) {
            let h = bits(hc, m);
            let e = params.energy(&v, &h)?;
            states.push((v.clone(), h, -e));
        }
    }
    let max = states.iter().map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = states.iter().map(|s| (s.2 - max).exp()).sum();
    let mut ev = vec![0.0; n];
    let mut eh = vec![0.0; m];
    let mut evh = vec![0.0; n * m];
    for (v, h, le) in &states {
        let p = (le - max).exp() / z;
        for i in 0..n {
            ev[i] += p * f64::from(v[i]);
            for j in 0..m {
                evh[i * m + j] += p * f64::from(v[i] * h[j]);
            }
        }
        for j in 0..m {
            eh[j] += p * f64::from(h[j]);
        }
    }
    Ok(ExactMoments {
        ev,
        eh,
        evh,
        log_norm: max + z.ln(),
    })
}

/// Marginal log-likelihood through joint enumeration.
pub fn joint_log_likelihood(params: &RbmParams, data: &[IncompleteObservation]) -> Result<f64> {
    let log_z = joint_log_partition(params)?;
    let mut total = 0.0;
    for o in data {
        total += joint_moments(params, Some(o))?.log_norm;
    }
    Ok(total / data.len() as f64 - log_z)
}

/// Conditional expectations given every visible except `i`:
/// `(E[v_i | ·], E[v_i h_j | ·] for all j)`, by enumeration over
/// `{v_i} × {h}` (`2^{1+m}` states).
pub fn visible_pair_conditionals(params: &RbmParams, v: &[u8], i: usize) -> Result<(f64, Vec<f64>)> {
    let m = params.m();
    guard(1 + m)?;
    let mut x = v.to_vec();
    let mut states = Vec::with_capacity(2 << m);
    for vi in 0..2u8 {
        x[i] = vi;
        for hc in 0..(1u64 << m) {
            let h = bits(hc, m);
            states.push((vi, h.clone(), -params.energy(&x, &h)?));
        }
    }
    let max = states.iter().map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = states.iter().map(|s| (s.2 - max).exp()).sum();
    let mut e_v = 0.0;
    let mut e_vh = vec![0.0; m];
    for (vi, h, le) in &states {
        if *vi == 1 {
            let p = (le - max).exp() / z;
            e_v += p;
            for j in 0..m {
                e_vh[j] += p * f64::from(h[j]);
            }
        }
    }
    Ok((e_v, e_vh))
}

/// `E[h_j | v]` by enumerating the two states of `h_j`.
pub fn hidden_conditional(params: &RbmParams, v: &[u8], j: usize) -> Result<f64> {
    let mut h = vec![0u8; params.m()];
    let e0 = params.energy(v, &h)?;
    h[j] = 1;
    let e1 = params.energy(v, &h)?;
    let (a, b) = (-e0, -e1);
    let max = a.max(b);
    Ok((b - max).exp() / ((a - max).exp() + (b - max).exp()))
}

/// `KL(Q || P(v_M, h | d))` for the product distribution with marginals
/// `mv` (over the missing visibles) and `mh`, by joint enumeration.
pub fn mean_field_kl(
    params: &RbmParams,
    obs: &IncompleteObservation,
    mv: &[f64],
    mh: &[f64],
) -> Result<f64> {
    let missing = obs.missing();
    let m = params.m();
    guard(missing.len() + m)?;
    let log_norm = joint_moments(params, Some(obs))?.log_norm;
    let mut v = obs.dense();
    let mut kl = 0.0;
    for vc in 0..(1u64 << missing.len()) {
        let mut log_q = 0.0;
        for (k, &i) in missing.iter().enumerate() {
            let bit = ((vc >> k) & 1) as u8;
            v[i] = bit;
            log_q += if bit == 1 { mv[k].ln() } else { (1.0 - mv[k]).ln() };
        }
        for hc in 0..(1u64 << m) {
            let h = bits(hc, m);
            let mut lq = log_q;
            for j in 0..m {
                lq += if h[j] == 1 { mh[j].ln() } else { (1.0 - mh[j]).ln() };
            }
            let q = lq.exp();
            if q > 0.0 {
                let lp = -params.energy(&v, &h)? - log_norm;
                kl += q * (lq - lp);
            }
        }
    }
    Ok(kl)
}

/// Central finite differences of [`exact_log_likelihood`].
pub fn finite_difference_gradient(
    params: &RbmParams,
    data: &[IncompleteObservation],
    step: f64,
) -> Result<Gradient> {
    let (n, m) = (params.n(), params.m());
    let mut g = Gradient::zeros(n, m);
    let total = params.num_params();
    for k in 0..total {
        let mut plus = params.clone();
        let mut minus = params.clone();
        nudge(&mut plus, k, step);
        nudge(&mut minus, k, -step);
        let d = (exact_log_likelihood(&plus, data)? - exact_log_likelihood(&minus, data)?) / (2.0 * step);
        if k < n {
            g.b[k] = d;
        } else if k < n + m {
            g.c[k - n] = d;
        } else {
            g.w[k - n - m] = d;
        }
    }
    Ok(g)
}

fn nudge(p: &mut RbmParams, k: usize, delta: f64) {
    let (n, m) = (p.n(), p.m());
    let (b, c, w) = p.parts_mut();
    if k < n {
        b[k] += delta;
    } else if k < n + m {
        c[k - n] += delta;
    } else {
        w[k - n - m] += delta;
    }
}
