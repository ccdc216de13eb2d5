//! Clamped mean-field equations and mean-field seeded initial points.
//!
//! For one observation the magnetizations solve
//! `m_i = σ(λ_i(m_h))` for missing visibles and `m_j = σ(τ_j(m_v ∪ d))` for
//! hiddens. The solver sweeps synchronously by block: every missing visible
//! from the previous hidden magnetizations, then every hidden from the new
//! visible ones.

use rand::Rng;
use rand_distr::Open01;

use crate::dataset::IncompleteObservation;
use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::rbm::{Clamp, RbmParams};
use crate::rng::RngStream;

/// Magnetizations stay inside the open unit interval even where the
/// sigmoid saturates in double precision.
const LOWER: f64 = f64::MIN_POSITIVE;
const UPPER: f64 = 1.0 - f64::EPSILON / 2.0;

#[inline]
fn magnetization(x: f64) -> f64 {
    sigmoid(x).clamp(LOWER, UPPER)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldSettings {
    /// Convergence threshold on the largest fixed-point residual.
    pub tol: f64,
    /// Maximum number of sweeps.
    pub max_iter: usize,
    /// Weight on the previous iterate, in `[0, 1)`. Zero is plain substitution.
    pub damping: f64,
}

impl Default for MeanFieldSettings {
    fn default() -> Self {
        MeanFieldSettings {
            tol: 1e-6,
            max_iter: 1000,
            damping: 0.0,
        }
    }
}

impl MeanFieldSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || !(0.0..1.0).contains(&self.damping) {
            return Err(Error::Config(format!("invalid mean-field settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldMoments {
    /// Magnetizations of the missing visibles, in increasing index order.
    pub mv: Vec<f64>,
    pub mh: Vec<f64>,
    /// Completed sweeps.
    pub iterations: usize,
    pub converged: bool,
}

impl MeanFieldMoments {
    pub fn new(mv: Vec<f64>, mh: Vec<f64>) -> Self {
        MeanFieldMoments {
            mv,
            mh,
            iterations: 0,
            converged: false,
        }
    }

    /// Independent `U(0, 1)` magnetizations.
    pub fn random<R: Rng + ?Sized>(num_missing: usize, m: usize, rng: &mut R) -> Self {
        let mv = (0..num_missing).map(|_| rng.sample(Open01)).collect();
        let mh = (0..m).map(|_| rng.sample(Open01)).collect();
        Self::new(mv, mh)
    }
}

struct ClampedSystem<'a> {
    params: &'a RbmParams,
    missing: Vec<usize>,
    base_fields: Vec<f64>,
}

impl<'a> ClampedSystem<'a> {
    fn new(params: &'a RbmParams, obs: &IncompleteObservation) -> Result<Self> {
        let clamp = Clamp::from_observation(obs);
        clamp.check(params)?;
        Ok(ClampedSystem {
            params,
            base_fields: clamp.base_hidden_fields(params),
            missing: clamp.free().to_vec(),
        })
    }

    fn visible_target(&self, k: usize, mh: &[f64]) -> f64 {
        let i = self.missing[k];
        let row = self.params.row(i);
        let lambda = self.params.visible_bias()[i] + row.iter().zip(mh).map(|(w, m)| w * m).sum::<f64>();
        magnetization(lambda)
    }

    fn hidden_fields(&self, mv: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.base_fields);
        for (&i, &mi) in self.missing.iter().zip(mv) {
            for (o, w) in out.iter_mut().zip(self.params.row(i)) {
                *o += w * mi;
            }
        }
    }

    fn check(&self, mf: &MeanFieldMoments) -> Result<()> {
        if mf.mv.len() != self.missing.len() {
            return Err(Error::DimensionMismatch {
                what: "visible magnetizations",
                expected: self.missing.len(),
                actual: mf.mv.len(),
            });
        }
        if mf.mh.len() != self.params.m() {
            return Err(Error::DimensionMismatch {
                what: "hidden magnetizations",
                expected: self.params.m(),
                actual: mf.mh.len(),
            });
        }
        Ok(())
    }

    fn solve(&self, mut mf: MeanFieldMoments, settings: &MeanFieldSettings) -> MeanFieldMoments {
        let m = self.params.m();
        let keep = settings.damping;
        let mut fields = vec![0.0; m];
        let mut new_v = vec![0.0; mf.mv.len()];
        let mut hidden_residual = f64::INFINITY;
        mf.iterations = 0;
        mf.converged = false;
        for sweep in 0..settings.max_iter {
            let mut dv: f64 = 0.0;
            for (k, slot) in new_v.iter_mut().enumerate() {
                *slot = self.visible_target(k, &mf.mh);
                dv = dv.max((*slot - mf.mv[k]).abs());
            }
            // after a full sweep the current state's residuals are known:
            // dv for the visible block, hidden_residual for the hidden block
            if sweep > 0 && dv < settings.tol && hidden_residual < settings.tol {
                mf.converged = true;
                return mf;
            }
            for (cur, &t) in mf.mv.iter_mut().zip(&new_v) {
                *cur = keep * *cur + (1.0 - keep) * t;
            }
            self.hidden_fields(&mf.mv, &mut fields);
            hidden_residual = 0.0;
            for (cur, &t) in mf.mh.iter_mut().zip(&fields) {
                let target = magnetization(t);
                let next = keep * *cur + (1.0 - keep) * target;
                hidden_residual = hidden_residual.max((target - next).abs());
                *cur = next;
            }
            mf.iterations += 1;
        }
        mf
    }
}

/// Solves the clamped mean-field equations from `init` by successive
/// substitution. Non-convergence within `max_iter` sweeps is reported
/// through `converged`, not as an error.
pub fn solve_clamped_mf(
    params: &RbmParams,
    obs: &IncompleteObservation,
    init: MeanFieldMoments,
    settings: &MeanFieldSettings,
) -> Result<MeanFieldMoments> {
    let sys = ClampedSystem::new(params, obs)?;
    sys.check(&init)?;
    if init.mv.iter().chain(&init.mh).any(|&x| !(x > 0.0 && x < 1.0)) {
        return Err(Error::Domain("initial magnetizations must lie in (0, 1)".into()));
    }
    Ok(sys.solve(init, settings))
}

/// Largest coordinatewise residual `|m - σ(field(m))|` over both blocks.
pub fn fixed_point_residual(params: &RbmParams, obs: &IncompleteObservation, mf: &MeanFieldMoments) -> Result<f64> {
    let sys = ClampedSystem::new(params, obs)?;
    sys.check(mf)?;
    let mut r: f64 = 0.0;
    for k in 0..mf.mv.len() {
        r = r.max((sys.visible_target(k, &mf.mh) - mf.mv[k]).abs());
    }
    let mut fields = vec![0.0; params.m()];
    sys.hidden_fields(&mf.mv, &mut fields);
    for (&t, &mj) in fields.iter().zip(&mf.mh) {
        r = r.max((magnetization(t) - mj).abs());
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitialPoints {
    /// One missing-visible configuration per restart.
    pub points: Vec<Vec<u8>>,
    /// Restarts whose solve hit `max_iter` (their last iterate was still used).
    pub non_converged: usize,
}

/// Multi-start mean-field initialization for the clamped chains: for each of
/// `count` restarts, draw `U(0,1)` magnetizations, solve, and sample one
/// configuration of the missing visibles from the product distribution.
pub fn generate_initial_points(
    params: &RbmParams,
    obs: &IncompleteObservation,
    count: usize,
    stream: RngStream,
    settings: &MeanFieldSettings,
) -> Result<InitialPoints> {
    if count == 0 {
        return Err(Error::Config("at least one initial point is required".into()));
    }
    let sys = ClampedSystem::new(params, obs)?;
    let mut points = Vec::with_capacity(count);
    let mut non_converged = 0;
    if sys.missing.is_empty() {
        points.resize(count, Vec::new());
        return Ok(InitialPoints { points, non_converged });
    }
    for nu in 0..count {
        let mut rng = stream.derive(nu as u64).rng();
        let init = MeanFieldMoments::random(sys.missing.len(), params.m(), &mut rng);
        let mf = sys.solve(init, settings);
        if !mf.converged {
            non_converged += 1;
        }
        points.push(mf.mv.iter().map(|&q| u8::from(rng.random::<f64>() < q)).collect());
    }
    Ok(InitialPoints { points, non_converged })
}
