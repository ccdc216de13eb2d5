//! Empirical variance of plain versus spatial moment estimates.

use rayon::prelude::*;

use crate::dataset::IncompleteObservation;
use crate::error::{Error, Result};
use crate::estimators::{mci_moments, MomentEstimates, SampleSet, SmciEngine};
use crate::oracle::{exact_clamped_moments, exact_free_moments, ExactSampler};
use crate::rbm::{Clamp, RbmParams};
use crate::rng::RngStream;
use crate::sampler::ChainState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moment {
    Visible(usize),
    Hidden(usize),
    Pair(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRow {
    pub moment: Moment,
    pub exact: f64,
    pub mean_mci: f64,
    pub mean_smci: f64,
    pub var_mci: f64,
    pub var_smci: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub sample_size: usize,
    pub sets: usize,
    pub rows: Vec<VarianceRow>,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn flatten(e: &MomentEstimates) -> Vec<f64> {
    e.ev.iter().chain(&e.eh).chain(&e.evh).copied().collect()
}

/// Draws `sets` independent sets of `k` exact samples (from the free
/// distribution, or the clamped one when `obs` is given) and records the
/// spread of both estimators for every moment over the free region.
pub fn variance_bench(
    params: &RbmParams,
    obs: Option<&IncompleteObservation>,
    k: usize,
    sets: usize,
    stream: RngStream,
) -> Result<VarianceReport> {
    if k == 0 || sets < 2 {
        return Err(Error::Config("need k ≥ 1 and at least 2 sample sets".into()));
    }
    let (sampler, exact, clamp) = match obs {
        Some(o) => (ExactSampler::clamped(params, o)?, exact_clamped_moments(params, o)?, Clamp::from_observation(o)),
        None => (ExactSampler::free(params)?, exact_free_moments(params)?, Clamp::all_free(params.n())),
    };
    let free = clamp.free().to_vec();
    let engine = SmciEngine::new(params);
    let per_set: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..sets)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream.derive(s as u64).rng();
            let states: Vec<ChainState> = (0..k)
                .map(|_| {
                    let (v, h) = sampler.draw_joint(params, &mut rng);
                    ChainState { v, h }
                })
                .collect();
            let mci = mci_moments(&states, &free)?;
            let samples = states.iter().map(|st| free.iter().map(|&i| st.v[i]).collect()).collect();
            let smci = engine.moments(&SampleSet::new(clamp.clone(), samples)?)?;
            Ok((flatten(&mci), flatten(&smci)))
        })
        .collect();
    let per_set = per_set.into_iter().collect::<Result<Vec<_>>>()?;
    let m = params.m();
    let mut moments: Vec<(Moment, f64)> = free.iter().map(|&i| (Moment::Visible(i), exact.ev[i])).collect();
    moments.extend((0..m).map(|j| (Moment::Hidden(j), exact.eh[j])));
    for &i in &free {
        moments.extend((0..m).map(|j| (Moment::Pair(i, j), exact.evh[i * m + j])));
    }
    let rows = moments
        .into_iter()
        .enumerate()
        .map(|(q, (moment, exact))| {
            let a: Vec<f64> = per_set.iter().map(|(x, _)| x[q]).collect();
            let b: Vec<f64> = per_set.iter().map(|(_, y)| y[q]).collect();
            let ((mean_mci, var_mci), (mean_smci, var_smci)) = (mean_var(&a), mean_var(&b));
            VarianceRow {
                moment,
                exact,
                mean_mci,
                mean_smci,
                var_mci,
                var_smci,
            }
        })
        .collect();
    Ok(VarianceReport {
        sample_size: k,
        sets,
        rows,
    })
}

impl VarianceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("moment,i,j,exact,mean_mci,mean_smci,var_mci,var_smci,ratio\n");
        for r in &self.rows {
            let (name, i, j) = match r.moment {
                Moment::Visible(i) => ("v", i.to_string(), String::new()),
                Moment::Hidden(j) => ("h", String::new(), j.to_string()),
                Moment::Pair(i, j) => ("vh", i.to_string(), j.to_string()),
            };
            let ratio = if r.var_mci > 0.0 { r.var_smci / r.var_mci } else { f64::NAN };
            out.push_str(&format!(
                "{name},{i},{j},{:?},{:?},{:?},{:?},{:?},{:?}\n",
                r.exact, r.mean_mci, r.mean_smci, r.var_mci, r.var_smci, ratio
            ));
        }
        out
    }
}
