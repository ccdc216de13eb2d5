//! Approximate log-likelihood gradients for one minibatch.
//!
//! Per datum the clamped statistics enter with the observed/missing split:
//! an observed `v_i` contributes `d_i` to `∂b_i` and `d_i E[h_j|d]` to
//! `∂w_ij`; a missing one contributes its estimated moments. The free
//! moments are subtracted once per batch.

use rayon::prelude::*;

use crate::dataset::IncompleteObservation;
use crate::error::{Error, Result};
use crate::estimators::{mci_moments, mixed_term_vh, MomentEstimates, SampleSet, SmciEngine};
use crate::meanfield::generate_initial_points;
use crate::rbm::{add_row, Gradient, RbmParams};
use crate::rng::{tags, RngStream};
use crate::sampler::{block_gibbs, block_gibbs_clamped, block_gibbs_clamped_states, uniform_visibles, PersistentChains};

use super::config::TrainConfig;

/// Mean-field bookkeeping for one gradient evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MeanFieldTally {
    pub solves: usize,
    pub failures: usize,
}

/// Combines per-datum clamped moments (each over the datum's missing set)
/// and free moments (over all visibles) into the batch-averaged gradient.
pub fn assemble_gradient(
    n: usize,
    batch: &[&IncompleteObservation],
    clamped: &[MomentEstimates],
    free: &MomentEstimates,
) -> Result<Gradient> {
    if batch.is_empty() {
        return Err(Error::Domain("empty minibatch".into()));
    }
    if clamped.len() != batch.len() {
        return Err(Error::DimensionMismatch {
            what: "clamped moment sets",
            expected: batch.len(),
            actual: clamped.len(),
        });
    }
    if free.free.len() != n || free.free.iter().enumerate().any(|(k, &i)| k != i) {
        return Err(Error::Domain("free moments must cover every visible in order".into()));
    }
    let m = free.m();
    let mut g = Gradient::zeros(n, m);
    for (obs, est) in batch.iter().zip(clamped) {
        if obs.n() != n || est.m() != m || est.free != obs.missing() {
            return Err(Error::Domain("clamped moments do not match the datum's missing set".into()));
        }
        add_row(&mut g.c, &est.eh);
        for (&i, &d) in obs.observed().iter().zip(obs.values()) {
            g.b[i] += f64::from(d);
            for (gw, &eh) in g.w[i * m..(i + 1) * m].iter_mut().zip(&est.eh) {
                *gw += mixed_term_vh(d, eh);
            }
        }
        for (k, &i) in est.free.iter().enumerate() {
            g.b[i] += est.ev[k];
            add_row(&mut g.w[i * m..(i + 1) * m], &est.evh[k * m..(k + 1) * m]);
        }
    }
    g.scale(1.0 / batch.len() as f64);
    for (x, &f) in g.b.iter_mut().zip(&free.ev) {
        *x -= f;
    }
    for (x, &f) in g.c.iter_mut().zip(&free.eh) {
        *x -= f;
    }
    for (x, &f) in g.w.iter_mut().zip(&free.evh) {
        *x -= f;
    }
    Ok(g)
}

/// Mean-field seeded clamped chains with spatial estimators per datum, and
/// persistent free chains with the same estimators over all visibles.
pub fn approx_gradient_proposed(
    params: &RbmParams,
    batch: &[&IncompleteObservation],
    chains: &mut PersistentChains,
    cfg: &TrainConfig,
    stream: RngStream,
) -> Result<(Gradient, MeanFieldTally)> {
    let engine = SmciEngine::new(params);
    let settings = cfg.mean_field();
    let clamped_stream = stream.derive(tags::CLAMPED);
    let mf_stream = stream.derive(tags::MEAN_FIELD);
    let per_datum: Vec<Result<(MomentEstimates, MeanFieldTally)>> = batch
        .par_iter()
        .enumerate()
        .map(|(mu, obs)| {
            let init = generate_initial_points(params, obs, cfg.clamped_samples, mf_stream.derive(mu as u64), &settings)?;
            let tally = MeanFieldTally {
                solves: if obs.is_complete() { 0 } else { cfg.clamped_samples },
                failures: init.non_converged,
            };
            let samples =
                block_gibbs_clamped(params, obs, &init.points, cfg.clamped_steps, clamped_stream.derive(mu as u64))?;
            Ok((engine.moments(&SampleSet::clamped(obs, samples)?)?, tally))
        })
        .collect();
    let mut clamped = Vec::with_capacity(batch.len());
    let mut tally = MeanFieldTally::default();
    for r in per_datum {
        let (est, t) = r?;
        tally.solves += t.solves;
        tally.failures += t.failures;
        clamped.push(est);
    }
    let visibles = chains.pcd_step(params, cfg.free_steps, stream.derive(tags::FREE))?.to_vec();
    let free = engine.moments(&SampleSet::free(params.n(), visibles)?)?;
    Ok((assemble_gradient(params.n(), batch, &clamped, &free)?, tally))
}

/// Uniform-initialized chains for both phases, paired `(v, h)` outputs
/// averaged directly. Chains are rebuilt on every call.
pub fn approx_gradient_lossycd(
    params: &RbmParams,
    batch: &[&IncompleteObservation],
    cfg: &TrainConfig,
    stream: RngStream,
) -> Result<Gradient> {
    let n = params.n();
    let clamped_stream = stream.derive(tags::CLAMPED);
    let init_stream = stream.derive(tags::INIT);
    let clamped: Vec<Result<MomentEstimates>> = batch
        .par_iter()
        .enumerate()
        .map(|(mu, obs)| {
            let missing = obs.missing();
            let init = uniform_visibles(missing.len(), cfg.clamped_samples, init_stream.derive(mu as u64));
            let states =
                block_gibbs_clamped_states(params, obs, &init, cfg.clamped_steps, clamped_stream.derive(mu as u64))?;
            mci_moments(&states, &missing)
        })
        .collect();
    let clamped = clamped.into_iter().collect::<Result<Vec<_>>>()?;
    let free_init = uniform_visibles(n, cfg.free_samples, stream.derive(tags::PCD_INIT));
    let states = block_gibbs(params, &free_init, cfg.free_steps, stream.derive(tags::FREE))?;
    let all: Vec<usize> = (0..n).collect();
    let free = mci_moments(&states, &all)?;
    assemble_gradient(n, batch, &clamped, &free)
}
