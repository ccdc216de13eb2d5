//! Moment estimators from visible-only sample sets.
//!
//! Plain Monte Carlo averages (`mci_moments`) serve the baseline. The
//! spatial estimators average conditional expectations instead of raw
//! samples:
//!
//! * `E[v_i]`     ≈ mean of `σ(φ_i(v))`, summing out `v_i` and the whole hidden layer,
//! * `E[h_j]`     ≈ mean of `σ(τ_j(v))`,
//! * `E[v_i h_j]` ≈ mean of `σ(w_ij + logit(σ(τ_{j,i}) σ(φ_{i,j})))`,
//!
//! with `τ_{j,i}(v) = τ_j(v) - w_ij v_i`,
//! `φ_i(v) = b_i + Σ_j [softplus(τ_{j,i} + w_ij) - softplus(τ_{j,i})]` and
//! `φ_{i,j} = φ_i - [softplus(τ_{j,i} + w_ij) - softplus(τ_{j,i})]`.
//!
//! The inner logit is evaluated as `logit(σ(a)σ(b)) = -ln(e^{-a} + e^{-b} + e^{-a-b})`.
//! When every exponent involved is provably below the overflow range the
//! whole computation runs on precomputed `e^{τ_j}` and `e^{±w_ij}` with no
//! transcendental calls per `(i, j)`; otherwise it falls back to the same
//! identity in the log domain.
//!
//! Only `τ[ν][j]` (and its exponential) is cached; `τ_{j,i}`, `φ_i` and
//! `φ_{i,j}` are recomputed on the fly, so a full pass costs `O(K |A| m)`.

use rayon::prelude::*;

use crate::dataset::IncompleteObservation;
use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus};
use crate::oracle::ExactMoments;
use crate::rbm::{add_row, Clamp, RbmParams};
use crate::sampler::ChainState;

/// Largest exponent the linear-domain kernel may form.
const EXP_BUDGET: f64 = 600.0;
/// Samples per parallel chunk; fixed so the reduction order never depends on threads.
const CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Mci,
    Smci,
    /// Exact moments from enumeration, restricted to a free region.
    Exact,
}

/// Samples of the free region `A` of a [`Clamp`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    clamp: Clamp,
    samples: Vec<Vec<u8>>,
}

impl SampleSet {
    pub fn new(clamp: Clamp, samples: Vec<Vec<u8>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Domain("sample set is empty".into()));
        }
        let k = clamp.free().len();
        for s in &samples {
            if s.len() != k {
                return Err(Error::DimensionMismatch {
                    what: "sample length",
                    expected: k,
                    actual: s.len(),
                });
            }
            if s.iter().any(|&x| x > 1) {
                return Err(Error::Domain("samples must be binary".into()));
            }
        }
        Ok(SampleSet { clamp, samples })
    }

    /// Samples for the free expectation (`A = V`).
    pub fn free(n: usize, samples: Vec<Vec<u8>>) -> Result<Self> {
        Self::new(Clamp::all_free(n), samples)
    }

    /// Samples of the missing visibles of `obs`.
    pub fn clamped(obs: &IncompleteObservation, samples: Vec<Vec<u8>>) -> Result<Self> {
        Self::new(Clamp::from_observation(obs), samples)
    }

    pub fn clamp(&self) -> &Clamp {
        &self.clamp
    }

    pub fn samples(&self) -> &[Vec<u8>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Hidden fields `τ_j` of every sample, plus log-domain accessors for the
/// derived quantities.
#[derive(Debug, Clone)]
pub struct FieldCache {
    m: usize,
    tau: Vec<f64>,
    exp_tau: Vec<f64>,
    max_abs_tau: Vec<f64>,
}

impl FieldCache {
    pub fn build(params: &RbmParams, set: &SampleSet) -> Result<Self> {
        set.clamp.check(params)?;
        let m = params.m();
        let base = set.clamp.base_hidden_fields(params);
        let free = set.clamp.free();
        let mut tau = Vec::with_capacity(set.len() * m);
        let mut max_abs_tau = Vec::with_capacity(set.len());
        let mut fields = vec![0.0; m];
        for s in &set.samples {
            fields.copy_from_slice(&base);
            for (&i, &x) in free.iter().zip(s) {
                if x != 0 {
                    add_row(&mut fields, params.row(i));
                }
            }
            max_abs_tau.push(fields.iter().fold(0.0_f64, |a, t| a.max(t.abs())));
            tau.extend_from_slice(&fields);
        }
        let exp_tau = tau.iter().map(|t| t.exp()).collect();
        Ok(FieldCache {
            m,
            tau,
            exp_tau,
            max_abs_tau,
        })
    }

    pub fn tau(&self, nu: usize, j: usize) -> f64 {
        self.tau[nu * self.m + j]
    }

    fn taus(&self, nu: usize) -> &[f64] {
        &self.tau[nu * self.m..(nu + 1) * self.m]
    }

    /// `τ_{j,i} = τ_j - w_ij v_i` for the `k`-th free visible `i`.
    pub fn tau_excl(&self, params: &RbmParams, set: &SampleSet, nu: usize, j: usize, k: usize) -> f64 {
        let i = set.clamp.free()[k];
        self.tau(nu, j) - params.weight(i, j) * f64::from(set.samples[nu][k])
    }

    /// `φ_i` for the `k`-th free visible.
    pub fn phi(&self, params: &RbmParams, set: &SampleSet, nu: usize, k: usize) -> f64 {
        let i = set.clamp.free()[k];
        let mut phi = params.visible_bias()[i];
        for j in 0..self.m {
            let a = self.tau_excl(params, set, nu, j, k);
            phi += softplus(a + params.weight(i, j)) - softplus(a);
        }
        phi
    }

    /// `φ_{i,j}`: `φ_i` without the contribution of hidden `j`.
    pub fn phi_excl(&self, params: &RbmParams, set: &SampleSet, nu: usize, k: usize, j: usize) -> f64 {
        let i = set.clamp.free()[k];
        let a = self.tau_excl(params, set, nu, j, k);
        self.phi(params, set, nu, k) - (softplus(a + params.weight(i, j)) - softplus(a))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates {
    pub kind: EstimatorKind,
    /// Indices of the free region, in the order of `ev` and the rows of `evh`.
    pub free: Vec<usize>,
    pub ev: Vec<f64>,
    pub eh: Vec<f64>,
    /// `|A| × m`, row-major.
    pub evh: Vec<f64>,
}

impl MomentEstimates {
    fn zeros(kind: EstimatorKind, free: Vec<usize>, m: usize) -> Self {
        let a = free.len();
        MomentEstimates {
            kind,
            free,
            ev: vec![0.0; a],
            eh: vec![0.0; m],
            evh: vec![0.0; a * m],
        }
    }

    fn add(&mut self, other: &MomentEstimates) {
        add_row(&mut self.ev, &other.ev);
        add_row(&mut self.eh, &other.eh);
        add_row(&mut self.evh, &other.evh);
    }

    fn scale(&mut self, s: f64) {
        self.ev.iter_mut().chain(&mut self.eh).chain(&mut self.evh).for_each(|x| *x *= s);
    }

    /// Exact moments restricted to the visibles in `free`.
    pub fn from_exact(exact: &ExactMoments, free: &[usize]) -> Self {
        let m = exact.eh.len();
        let mut evh = Vec::with_capacity(free.len() * m);
        for &i in free {
            evh.extend_from_slice(&exact.evh[i * m..(i + 1) * m]);
        }
        MomentEstimates {
            kind: EstimatorKind::Exact,
            free: free.to_vec(),
            ev: free.iter().map(|&i| exact.ev[i]).collect(),
            eh: exact.eh.clone(),
            evh,
        }
    }

    pub fn m(&self) -> usize {
        self.eh.len()
    }

    pub fn vh(&self, k: usize, j: usize) -> f64 {
        self.evh[k * self.m() + j]
    }
}

/// Plain sample averages of `v_i`, `h_j` and `v_i h_j` over paired chain
/// states, restricted to visibles in `free`.
pub fn mci_moments(states: &[ChainState], free: &[usize]) -> Result<MomentEstimates> {
    let first = states.first().ok_or_else(|| Error::Domain("sample set is empty".into()))?;
    let m = first.h.len();
    let mut out = MomentEstimates::zeros(EstimatorKind::Mci, free.to_vec(), m);
    for s in states {
        for (a, &h) in out.eh.iter_mut().zip(&s.h) {
            *a += f64::from(h);
        }
        for (k, &i) in free.iter().enumerate() {
            if s.v[i] != 0 {
                out.ev[k] += 1.0;
                for (a, &h) in out.evh[k * m..(k + 1) * m].iter_mut().zip(&s.h) {
                    *a += f64::from(h);
                }
            }
        }
    }
    out.scale(1.0 / states.len() as f64);
    Ok(out)
}

/// The observed branch of the coupling gradient: `d_i · E[h_j | d]`.
#[inline]
pub fn mixed_term_vh(d_i: u8, eh_j: f64) -> f64 {
    if d_i == 0 {
        0.0
    } else {
        eh_j
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// Linear domain where safe, log domain otherwise.
    Auto,
    /// Always the log-domain form.
    LogDomain,
}

#[derive(Debug, Clone, Copy)]
struct Want {
    v: bool,
    h: bool,
    vh: bool,
}

const ALL: Want = Want {
    v: true,
    h: true,
    vh: true,
};

/// Spatial estimators for one parameter setting. Building the engine costs
/// `O(nm)` exponentials, shared by every sample set evaluated under the same
/// parameters.
#[derive(Debug, Clone)]
pub struct SmciEngine<'a> {
    params: &'a RbmParams,
    kernel: Kernel,
    exp_w: Vec<f64>,
    exp_neg_w: Vec<f64>,
    exp_neg_b: Vec<f64>,
    /// Per visible: a bound on every exponent the linear kernel forms, less the `τ` term.
    row_margin: Vec<f64>,
}

impl<'a> SmciEngine<'a> {
    pub fn new(params: &'a RbmParams) -> Self {
        Self::with_kernel(params, Kernel::Auto)
    }

    pub fn with_kernel(params: &'a RbmParams, kernel: Kernel) -> Self {
        let (n, m) = (params.n(), params.m());
        let exp_w: Vec<f64> = params.weights().iter().map(|w| w.exp()).collect();
        let exp_neg_w = params.weights().iter().map(|w| (-w).exp()).collect();
        let exp_neg_b = params.visible_bias().iter().map(|b| (-b).exp()).collect();
        let row_margin = (0..n)
            .map(|i| {
                let row = params.row(i);
                let sum: f64 = row.iter().map(|w| w.abs()).sum();
                let max = row.iter().fold(0.0_f64, |a, w| a.max(w.abs()));
                params.visible_bias()[i].abs() + sum + 3.0 * max
            })
            .collect();
        debug_assert_eq!(exp_w.len(), n * m);
        SmciEngine {
            params,
            kernel,
            exp_w,
            exp_neg_w,
            exp_neg_b,
            row_margin,
        }
    }

    pub fn params(&self) -> &RbmParams {
        self.params
    }

    /// All three spatial estimates in one pass over the samples.
    pub fn moments(&self, set: &SampleSet) -> Result<MomentEstimates> {
        self.estimate(set, ALL)
    }

    /// `E[v_i]` over the free region.
    pub fn smci_v(&self, set: &SampleSet) -> Result<Vec<f64>> {
        Ok(self
            .estimate(
                set,
                Want {
                    v: true,
                    h: false,
                    vh: false,
                },
            )?
            .ev)
    }

    /// `E[h_j]`.
    pub fn smci_h(&self, set: &SampleSet) -> Result<Vec<f64>> {
        Ok(self
            .estimate(
                set,
                Want {
                    v: false,
                    h: true,
                    vh: false,
                },
            )?
            .eh)
    }

    /// `E[v_i h_j]` over the free region, `|A| × m` row-major.
    pub fn smci_vh(&self, set: &SampleSet) -> Result<Vec<f64>> {
        Ok(self
            .estimate(
                set,
                Want {
                    v: false,
                    h: false,
                    vh: true,
                },
            )?
            .evh)
    }

    /// The per-sample terms of sample `nu`, before averaging.
    pub fn summands(&self, set: &SampleSet, nu: usize) -> Result<MomentEstimates> {
        let cache = FieldCache::build(self.params, set)?;
        let mut out = MomentEstimates::zeros(EstimatorKind::Smci, set.clamp.free().to_vec(), self.params.m());
        let mut scratch = Scratch::new(self.params.m());
        self.accumulate(set, &cache, nu, ALL, &mut out, &mut scratch);
        Ok(out)
    }

    fn estimate(&self, set: &SampleSet, want: Want) -> Result<MomentEstimates> {
        let cache = FieldCache::build(self.params, set)?;
        let free = set.clamp.free().to_vec();
        let m = self.params.m();
        let k = set.len();
        let run = |range: std::ops::Range<usize>| {
            let mut part = MomentEstimates::zeros(EstimatorKind::Smci, free.clone(), m);
            let mut scratch = Scratch::new(m);
            for nu in range {
                self.accumulate(set, &cache, nu, want, &mut part, &mut scratch);
            }
            part
        };
        let mut total = if k <= CHUNK {
            run(0..k)
        } else {
            let chunks: Vec<_> = (0..k.div_ceil(CHUNK))
                .into_par_iter()
                .map(|c| run(c * CHUNK..((c + 1) * CHUNK).min(k)))
                .collect();
            let mut it = chunks.into_iter();
            let mut acc = it.next().expect("at least one chunk");
            for c in it {
                acc.add(&c);
            }
            acc
        };
        total.scale(1.0 / k as f64);
        Ok(total)
    }

    fn accumulate(
        &self,
        set: &SampleSet,
        cache: &FieldCache,
        nu: usize,
        want: Want,
        out: &mut MomentEstimates,
        scratch: &mut Scratch,
    ) {
        let m = self.params.m();
        let taus = cache.taus(nu);
        let sample = &set.samples[nu];
        let t_max = cache.max_abs_tau[nu];
        let linear_ok = self.kernel == Kernel::Auto && t_max <= EXP_BUDGET;
        let xs = &cache.exp_tau[nu * m..(nu + 1) * m];

        if want.h {
            for (a, (&t, &x)) in out.eh.iter_mut().zip(taus.iter().zip(xs)) {
                *a += if linear_ok { x / (1.0 + x) } else { sigmoid(t) };
            }
        }
        if !(want.v || want.vh) {
            return;
        }
        for (k, &i) in set.clamp.free().iter().enumerate() {
            let on = sample[k] != 0;
            let evh_row = &mut out.evh[k * m..(k + 1) * m];
            if linear_ok && t_max + self.row_margin[i] <= EXP_BUDGET {
                let ew = &self.exp_w[i * m..(i + 1) * m];
                let enw = &self.exp_neg_w[i * m..(i + 1) * m];
                let mut prod = 1.0;
                for j in 0..m {
                    // e^{τ_{j,i}} and R_j = e^{softplus(τ_{j,i} + w) - softplus(τ_{j,i})}
                    let ea = if on { xs[j] * enw[j] } else { xs[j] };
                    let r = (1.0 + ea * ew[j]) / (1.0 + ea);
                    scratch.a[j] = ea;
                    scratch.d[j] = r;
                    prod *= r;
                }
                let e_neg_phi = self.exp_neg_b[i] / prod;
                if want.v {
                    out.ev[k] += 1.0 / (1.0 + e_neg_phi);
                }
                if want.vh {
                    for j in 0..m {
                        let e_neg_a = 1.0 / scratch.a[j];
                        let e_neg_b = e_neg_phi * scratch.d[j];
                        let s = e_neg_a + e_neg_b + e_neg_a * e_neg_b;
                        evh_row[j] += 1.0 / (1.0 + enw[j] * s);
                    }
                }
            } else {
                let row = self.params.row(i);
                let mut phi = self.params.visible_bias()[i];
                for j in 0..m {
                    let a = if on { taus[j] - row[j] } else { taus[j] };
                    let d = softplus(a + row[j]) - softplus(a);
                    scratch.a[j] = a;
                    scratch.d[j] = d;
                    phi += d;
                }
                if want.v {
                    out.ev[k] += sigmoid(phi);
                }
                if want.vh {
                    for j in 0..m {
                        let a = scratch.a[j];
                        let b = phi - scratch.d[j];
                        evh_row[j] += sigmoid(row[j] + neg_log_odds_product(a, b));
                    }
                }
            }
        }
    }
}

/// `logit(σ(a) σ(b)) = -ln(e^{-a} + e^{-b} + e^{-a-b})`, max-shifted.
#[inline]
fn neg_log_odds_product(a: f64, b: f64) -> f64 {
    let (x, y, z) = (-a, -b, -a - b);
    let mx = x.max(y).max(z);
    -(mx + ((x - mx).exp() + (y - mx).exp() + (z - mx).exp()).ln())
}

struct Scratch {
    a: Vec<f64>,
    d: Vec<f64>,
}

impl Scratch {
    fn new(m: usize) -> Self {
        Scratch {
            a: vec![0.0; m],
            d: vec![0.0; m],
        }
    }
}

/// Spatial estimate of `E[v_i]` over the free region.
pub fn smci_v(params: &RbmParams, set: &SampleSet) -> Result<Vec<f64>> {
    SmciEngine::new(params).smci_v(set)
}

/// Spatial estimate of `E[h_j]`.
pub fn smci_h(params: &RbmParams, set: &SampleSet) -> Result<Vec<f64>> {
    SmciEngine::new(params).smci_h(set)
}

/// Spatial estimate of `E[v_i h_j]` over the free region.
pub fn smci_vh(params: &RbmParams, set: &SampleSet) -> Result<Vec<f64>> {
    SmciEngine::new(params).smci_vh(set)
}
