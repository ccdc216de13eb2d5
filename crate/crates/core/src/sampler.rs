//! Blocked Gibbs sampling on the joint and clamped distributions, and
//! persistent chains for the free expectation.
//!
//! Chain `ν` draws from `stream.derive(ν)`, so chains are independent,
//! may run in parallel, and reproduce bit-for-bit. Each Bernoulli draw uses
//! one uniform per coordinate, in index order, compared against the
//! conditional mean.

use rand::Rng;
use rayon::prelude::*;

use crate::dataset::IncompleteObservation;
use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::rbm::{add_row, Clamp, RbmParams};
use crate::rng::{RngStream, StreamRng};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainState {
    pub v: Vec<u8>,
    pub h: Vec<u8>,
}

#[inline]
fn draw_hidden(fields: &[f64], h: &mut [u8], rng: &mut StreamRng) {
    for (hj, &t) in h.iter_mut().zip(fields) {
        *hj = u8::from(rng.random::<f64>() < sigmoid(t));
    }
}

fn check_visibles(n: usize, vs: &[Vec<u8>]) -> Result<()> {
    for v in vs {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                what: "initial visible vector",
                expected: n,
                actual: v.len(),
            });
        }
    }
    Ok(())
}

/// Runs one chain in place: `h₀ ~ P(h|v₀)`, then `steps` alternations
/// `v ~ P(v|h)`, `h ~ P(h|v)`.
fn run_chain(params: &RbmParams, v: &mut [u8], h: &mut [u8], steps: usize, rng: &mut StreamRng) {
    let mut fields = vec![0.0; params.m()];
    params.hidden_fields_into(v, &mut fields);
    draw_hidden(&fields, h, rng);
    for _ in 0..steps {
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = u8::from(rng.random::<f64>() < sigmoid(params.visible_field_at(h, i)));
        }
        params.hidden_fields_into(v, &mut fields);
        draw_hidden(&fields, h, rng);
    }
}

/// Blocked Gibbs sampling from `P_θ(v, h)`; returns the final `(v_R, h_R)` of each chain.
pub fn block_gibbs(
    params: &RbmParams,
    initial_visibles: &[Vec<u8>],
    steps: usize,
    stream: RngStream,
) -> Result<Vec<ChainState>> {
    check_visibles(params.n(), initial_visibles)?;
    Ok(initial_visibles
        .par_iter()
        .enumerate()
        .map(|(nu, v0)| {
            let mut rng = stream.derive(nu as u64).rng();
            let mut v = v0.clone();
            let mut h = vec![0u8; params.m()];
            run_chain(params, &mut v, &mut h, steps, &mut rng);
            ChainState { v, h }
        })
        .collect())
}

/// Clamped chain over the free region of `clamp`. Fixed coordinates are
/// never written.
fn run_clamped_chain(
    params: &RbmParams,
    clamp: &Clamp,
    base_fields: &[f64],
    init: &[u8],
    steps: usize,
    rng: &mut StreamRng,
) -> ChainState {
    let free = clamp.free();
    let mut v = clamp.full(init);
    let mut h = vec![0u8; params.m()];
    let mut fields = vec![0.0; params.m()];
    let refresh = |v: &[u8], fields: &mut [f64]| {
        fields.copy_from_slice(base_fields);
        for &i in free {
            if v[i] != 0 {
                add_row(fields, params.row(i));
            }
        }
    };
    refresh(&v, &mut fields);
    draw_hidden(&fields, &mut h, rng);
    for _ in 0..steps {
        for &i in free {
            v[i] = u8::from(rng.random::<f64>() < sigmoid(params.visible_field_at(&h, i)));
        }
        debug_assert!(
            v.iter().zip(clamp.base()).enumerate().all(|(i, (a, b))| free.binary_search(&i).is_ok() || a == b),
            "clamped sampler changed an observed coordinate"
        );
        refresh(&v, &mut fields);
        draw_hidden(&fields, &mut h, rng);
    }
    ChainState { v, h }
}

fn clamped_states(
    params: &RbmParams,
    obs: &IncompleteObservation,
    initial_missing: &[Vec<u8>],
    steps: usize,
    stream: RngStream,
) -> Result<(Clamp, Vec<ChainState>)> {
    let clamp = Clamp::from_observation(obs);
    clamp.check(params)?;
    let k = clamp.free().len();
    for s in initial_missing {
        if s.len() != k {
            return Err(Error::DimensionMismatch {
                what: "initial missing-visible vector",
                expected: k,
                actual: s.len(),
            });
        }
    }
    if k == 0 {
        let states = initial_missing
            .iter()
            .map(|_| ChainState {
                v: clamp.base().to_vec(),
                h: Vec::new(),
            })
            .collect();
        return Ok((clamp, states));
    }
    let base = clamp.base_hidden_fields(params);
    let states = initial_missing
        .iter()
        .enumerate()
        .map(|(nu, init)| {
            let mut rng = stream.derive(nu as u64).rng();
            run_clamped_chain(params, &clamp, &base, init, steps, &mut rng)
        })
        .collect();
    Ok((clamp, states))
}

/// Blocked Gibbs on `P_θ(v_M, h | d)`. Returns the final missing-visible
/// configurations; hidden states are dropped. With no missing visibles the
/// outputs are empty vectors and nothing is sampled.
pub fn block_gibbs_clamped(
    params: &RbmParams,
    obs: &IncompleteObservation,
    initial_missing: &[Vec<u8>],
    steps: usize,
    stream: RngStream,
) -> Result<Vec<Vec<u8>>> {
    let (clamp, states) = clamped_states(params, obs, initial_missing, steps, stream)?;
    Ok(states
        .into_iter()
        .map(|s| clamp.free().iter().map(|&i| s.v[i]).collect())
        .collect())
}

/// Same chains as [`block_gibbs_clamped`], returning full visible vectors
/// paired with the final hidden states. When nothing is missing the hidden
/// vector is drawn once from `P(h | d)`.
pub fn block_gibbs_clamped_states(
    params: &RbmParams,
    obs: &IncompleteObservation,
    initial_missing: &[Vec<u8>],
    steps: usize,
    stream: RngStream,
) -> Result<Vec<ChainState>> {
    let (clamp, states) = clamped_states(params, obs, initial_missing, steps, stream)?;
    if !clamp.free().is_empty() {
        return Ok(states);
    }
    let base = clamp.base_hidden_fields(params);
    Ok(states
        .into_iter()
        .enumerate()
        .map(|(nu, s)| {
            let mut rng = stream.derive(nu as u64).rng();
            let mut h = vec![0u8; params.m()];
            draw_hidden(&base, &mut h, &mut rng);
            ChainState { v: s.v, h }
        })
        .collect())
}

/// Uniform random binary vectors.
pub fn uniform_visibles(len: usize, count: usize, stream: RngStream) -> Vec<Vec<u8>> {
    (0..count)
        .map(|nu| {
            let mut rng = stream.derive(nu as u64).rng();
            (0..len).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect()
        })
        .collect()
}

/// Fantasy particles carried across parameter updates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersistentChains {
    visibles: Vec<Vec<u8>>,
    age: u64,
}

impl PersistentChains {
    /// Uniform random initial visibles.
    pub fn uniform(n: usize, count: usize, stream: RngStream) -> Self {
        PersistentChains {
            visibles: uniform_visibles(n, count, stream),
            age: 0,
        }
    }

    pub fn from_visibles(visibles: Vec<Vec<u8>>) -> Self {
        PersistentChains { visibles, age: 0 }
    }

    pub fn len(&self) -> usize {
        self.visibles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visibles.is_empty()
    }

    pub fn visibles(&self) -> &[Vec<u8>] {
        &self.visibles
    }

    /// Number of completed [`pcd_step`](Self::pcd_step) calls.
    pub fn age(&self) -> u64 {
        self.age
    }

    /// Advances every chain `steps` Gibbs sweeps under the current `params`
    /// and returns the new visibles, which also become the stored state.
    pub fn pcd_step(&mut self, params: &RbmParams, steps: usize, stream: RngStream) -> Result<&[Vec<u8>]> {
        let states = block_gibbs(params, &self.visibles, steps, stream)?;
        for (slot, s) in self.visibles.iter_mut().zip(states) {
            *slot = s.v;
        }
        self.age += 1;
        Ok(&self.visibles)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RbmParams {
        RbmParams::new(
            vec![0.2, -0.4, 0.1, 0.3],
            vec![-0.2, 0.5, 0.1],
            vec![0.8, -0.6, 0.3, -0.5, 0.9, 0.2, 0.4, 0.1, -0.7, 0.6, -0.3, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn zero_steps_returns_initial_visibles() {
        let p = small();
        let init = vec![vec![1, 0, 1, 1], vec![0, 0, 0, 1]];
        let out = block_gibbs(&p, &init, 0, RngStream::new(3)).unwrap();
        assert_eq!(out[0].v, init[0]);
        assert_eq!(out[1].v, init[1]);
        assert_eq!(out[0].h.len(), 3);
    }

    #[test]
    fn deterministic_streams() {
        let p = small();
        let init = uniform_visibles(4, 16, RngStream::new(1));
        let a = block_gibbs(&p, &init, 5, RngStream::new(9)).unwrap();
        let b = block_gibbs(&p, &init, 5, RngStream::new(9)).unwrap();
        assert_eq!(a, b);
        let c = block_gibbs(&p, &init, 5, RngStream::new(10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dimension_mismatch() {
        let p = small();
        assert!(block_gibbs(&p, &[vec![1, 0]], 1, RngStream::new(0)).is_err());
        let obs = IncompleteObservation::new(4, vec![0, 1], vec![1, 1]).unwrap();
        assert!(block_gibbs_clamped(&p, &obs, &[vec![1, 0, 1]], 1, RngStream::new(0)).is_err());
    }

    #[test]
    fn clamped_keeps_observed_and_empty_missing() {
        let p = small();
        let obs = IncompleteObservation::new(4, vec![0, 2], vec![1, 0]).unwrap();
        let init = uniform_visibles(2, 50, RngStream::new(2));
        let st = block_gibbs_clamped_states(&p, &obs, &init, 10, RngStream::new(4)).unwrap();
        for s in &st {
            assert_eq!(s.v[0], 1);
            assert_eq!(s.v[2], 0);
        }
        let full = IncompleteObservation::complete(&[1, 0, 1, 1]).unwrap();
        let out = block_gibbs_clamped(&p, &full, &[vec![], vec![]], 10, RngStream::new(4)).unwrap();
        assert_eq!(out, vec![Vec::<u8>::new(), Vec::new()]);
    }

    #[test]
    fn pcd_keeps_chain_count_and_ages() {
        let p = small();
        let mut pc = PersistentChains::uniform(4, 8, RngStream::new(5));
        let before = pc.visibles().to_vec();
        pc.pcd_step(&p, 3, RngStream::new(6)).unwrap();
        assert_eq!(pc.len(), 8);
        assert_eq!(pc.age(), 1);
        assert_ne!(pc.visibles(), &before[..]);
    }
}
