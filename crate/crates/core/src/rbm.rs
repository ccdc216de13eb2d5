//! RBM parameterization, energy and layer conditionals.
//!
//! Visibles are indexed `0..n`, hiddens `0..m`. The coupling matrix is stored
//! dense and row-major by visible index. Both local fields are computed with
//! row traversals only: `λ(h)` is a dot product of each row with `h`, and
//! `τ(v)` is `c` plus the sum of the rows whose visible is on. Neither needs
//! a transpose.

use crate::dataset::IncompleteObservation;
use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus};

#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams {
    n: usize,
    m: usize,
    b: Vec<f64>,
    c: Vec<f64>,
    w: Vec<f64>,
}

impl RbmParams {
    /// `w` is row-major `n × m`; `n = b.len()`, `m = c.len()`.
    pub fn new(b: Vec<f64>, c: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let (n, m) = (b.len(), c.len());
        if n == 0 || m == 0 {
            return Err(Error::Domain("an RBM needs at least one visible and one hidden unit".into()));
        }
        if w.len() != n * m {
            return Err(Error::DimensionMismatch {
                what: "coupling matrix",
                expected: n * m,
                actual: w.len(),
            });
        }
        let p = RbmParams { n, m, b, c, w };
        if !p.is_finite() {
            return Err(Error::Domain("parameters must be finite".into()));
        }
        Ok(p)
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        assert!(n > 0 && m > 0, "an RBM needs at least one unit per layer");
        RbmParams {
            n,
            m,
            b: vec![0.0; n],
            c: vec![0.0; m],
            w: vec![0.0; n * m],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn visible_bias(&self) -> &[f64] {
        &self.b
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.c
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.m + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.m..(i + 1) * self.m]
    }

    pub fn num_params(&self) -> usize {
        self.n + self.m + self.n * self.m
    }

    pub fn is_finite(&self) -> bool {
        self.b.iter().chain(&self.c).chain(&self.w).all(|x| x.is_finite())
    }

    /// Mutable views `(b, c, w)`, in the flat order used by the optimizer.
    pub fn parts_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64]) {
        (&mut self.b, &mut self.c, &mut self.w)
    }

    fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
        if expected != actual {
            return Err(Error::DimensionMismatch {
                what,
                expected,
                actual,
            });
        }
        Ok(())
    }

    pub fn energy(&self, v: &[u8], h: &[u8]) -> Result<f64> {
        Self::check_len("visible vector", self.n, v.len())?;
        Self::check_len("hidden vector", self.m, h.len())?;
        let mut e = 0.0;
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0 {
                e -= self.b[i];
                for (j, &hj) in h.iter().enumerate() {
                    if hj != 0 {
                        e -= self.weight(i, j);
                    }
                }
            }
        }
        for (j, &hj) in h.iter().enumerate() {
            if hj != 0 {
                e -= self.c[j];
            }
        }
        Ok(e)
    }

    /// `λ_i(h) = b_i + Σ_j w_ij h_j`.
    pub fn local_field_visible(&self, h: &[u8], i: usize) -> Result<f64> {
        Self::check_len("hidden vector", self.m, h.len())?;
        if i >= self.n {
            return Err(Error::IndexOutOfRange {
                what: "visible unit",
                index: i,
                len: self.n,
            });
        }
        Ok(self.visible_field_at(h, i))
    }

    /// `τ_j(v) = c_j + Σ_i w_ij v_i`.
    pub fn local_field_hidden(&self, v: &[u8], j: usize) -> Result<f64> {
        Self::check_len("visible vector", self.n, v.len())?;
        if j >= self.m {
            return Err(Error::IndexOutOfRange {
                what: "hidden unit",
                index: j,
                len: self.m,
            });
        }
        let mut t = self.c[j];
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0 {
                t += self.weight(i, j);
            }
        }
        Ok(t)
    }

    #[inline]
    pub(crate) fn visible_field_at(&self, h: &[u8], i: usize) -> f64 {
        let row = self.row(i);
        let mut t = self.b[i];
        for (w, &hj) in row.iter().zip(h) {
            if hj != 0 {
                t += w;
            }
        }
        t
    }

    /// Writes `τ(v)` into `out`.
    #[inline]
    pub(crate) fn hidden_fields_into(&self, v: &[u8], out: &mut [f64]) {
        out.copy_from_slice(&self.c);
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0 {
                add_row(out, self.row(i));
            }
        }
    }

    pub fn hidden_fields(&self, v: &[u8]) -> Result<Vec<f64>> {
        Self::check_len("visible vector", self.n, v.len())?;
        let mut out = vec![0.0; self.m];
        self.hidden_fields_into(v, &mut out);
        Ok(out)
    }

    /// `P(h_j = 1 | v)` for every `j`.
    pub fn conditional_means_hidden(&self, v: &[u8]) -> Result<Vec<f64>> {
        let mut t = self.hidden_fields(v)?;
        t.iter_mut().for_each(|x| *x = sigmoid(*x));
        Ok(t)
    }

    /// `P(v_i = 1 | h)` for every `i`.
    pub fn conditional_means_visible(&self, h: &[u8]) -> Result<Vec<f64>> {
        Self::check_len("hidden vector", self.m, h.len())?;
        Ok((0..self.n).map(|i| sigmoid(self.visible_field_at(h, i))).collect())
    }

    /// `Σ_i b_i v_i + Σ_j softplus(τ_j(v))`: the log of the hidden-summed
    /// Boltzmann weight of `v` (negative free energy).
    pub fn log_marginal_weight(&self, v: &[u8]) -> Result<f64> {
        let t = self.hidden_fields(v)?;
        Ok(self.log_weight_from_fields(v, &t))
    }

    #[inline]
    pub(crate) fn log_weight_from_fields(&self, v: &[u8], fields: &[f64]) -> f64 {
        let mut s = 0.0;
        for (&vi, &bi) in v.iter().zip(&self.b) {
            if vi != 0 {
                s += bi;
            }
        }
        s + fields.iter().map(|&t| softplus(t)).sum::<f64>()
    }
}

#[inline]
pub(crate) fn add_row(acc: &mut [f64], row: &[f64]) {
    for (a, w) in acc.iter_mut().zip(row) {
        *a += w;
    }
}

/// Partition of the visible layer into a fixed context and a free region `A`.
///
/// `base` carries the context values at fixed positions and zeros at free
/// positions. The free expectation is the special case with every visible free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clamp {
    free: Vec<usize>,
    base: Vec<u8>,
}

impl Clamp {
    pub fn all_free(n: usize) -> Self {
        Clamp {
            free: (0..n).collect(),
            base: vec![0; n],
        }
    }

    pub fn from_observation(obs: &IncompleteObservation) -> Self {
        Clamp {
            free: obs.missing(),
            base: obs.dense(),
        }
    }

    pub fn n(&self) -> usize {
        self.base.len()
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn base(&self) -> &[u8] {
        &self.base
    }

    /// Scatters a free-region configuration into a full visible vector.
    #[inline]
    pub fn fill(&self, sample: &[u8], out: &mut [u8]) {
        out.copy_from_slice(&self.base);
        for (&i, &s) in self.free.iter().zip(sample) {
            out[i] = s;
        }
    }

    pub fn full(&self, sample: &[u8]) -> Vec<u8> {
        let mut v = self.base.clone();
        self.fill(sample, &mut v);
        v
    }

    /// `c + Σ_{fixed i with value 1} W_i`: the hidden fields with every free
    /// visible off.
    pub fn base_hidden_fields(&self, params: &RbmParams) -> Vec<f64> {
        let mut out = vec![0.0; params.m()];
        params.hidden_fields_into(&self.base, &mut out);
        out
    }

    pub(crate) fn check(&self, params: &RbmParams) -> Result<()> {
        if self.n() != params.n() {
            return Err(Error::DimensionMismatch {
                what: "observation length",
                expected: params.n(),
                actual: self.n(),
            });
        }
        Ok(())
    }
}

/// A gradient (or any vector) over `(b, c, W)`, `W` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub w: Vec<f64>,
}

impl Gradient {
    pub fn zeros(n: usize, m: usize) -> Self {
        Gradient {
            b: vec![0.0; n],
            c: vec![0.0; m],
            w: vec![0.0; n * m],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.b.iter().chain(&self.c).chain(&self.w)
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Gradient) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn scale(&mut self, s: f64) {
        self.b.iter_mut().chain(&mut self.c).chain(&mut self.w).for_each(|x| *x *= s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> RbmParams {
        RbmParams::new(vec![0.1, -0.2], vec![0.3, -0.4], vec![1.0, -1.0, 0.5, 0.5]).unwrap()
    }

    #[test]
    fn constructor_validation() {
        assert!(RbmParams::new(vec![], vec![1.0], vec![]).is_err());
        assert!(RbmParams::new(vec![1.0], vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(RbmParams::new(vec![f64::NAN], vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn energy_trivial_cases() {
        let z = RbmParams::zeros(3, 2);
        assert_eq!(z.energy(&[1, 0, 1], &[1, 1]).unwrap(), 0.0);
        let p = RbmParams::new(vec![1.0], vec![1.0], vec![1.0]).unwrap();
        assert_eq!(p.energy(&[1], &[1]).unwrap(), -3.0);
        assert!(p.energy(&[1, 0], &[1]).is_err());
    }

    #[test]
    fn local_fields() {
        let p = two_by_two();
        // λ_0(h = (1, 0)) = 0.1 + 1
        assert!((p.local_field_visible(&[1, 0], 0).unwrap() - 1.1).abs() < 1e-15);
        assert_eq!(p.local_field_visible(&[0, 0], 1).unwrap(), -0.2);
        // τ_0(v = (1, 1)) = c_0 + w_00 + w_10 = 0.3 + 1 + 0.5
        assert!((p.local_field_hidden(&[1, 1], 0).unwrap() - 1.8).abs() < 1e-15);
        // τ_1(v = (1, 1)) = -0.4 - 1 + 0.5
        assert!((p.local_field_hidden(&[1, 1], 1).unwrap() + 0.9).abs() < 1e-15);
        assert_eq!(p.local_field_hidden(&[0, 0], 1).unwrap(), -0.4);
        assert!(p.local_field_hidden(&[0, 0], 2).is_err());
        assert!(p.local_field_visible(&[0, 0], 2).is_err());
    }

    #[test]
    fn conditional_means_trivial() {
        let z = RbmParams::zeros(3, 2);
        assert!(z.conditional_means_hidden(&[1, 0, 1]).unwrap().iter().all(|&x| x == 0.5));
        assert!(z.conditional_means_visible(&[1, 0]).unwrap().iter().all(|&x| x == 0.5));
        let sat = RbmParams::new(vec![50.0, 0.0], vec![0.0], vec![0.0, 0.0]).unwrap();
        let mv = sat.conditional_means_visible(&[1]).unwrap();
        assert!((1.0 - mv[0]).abs() < 1e-15);
    }

    #[test]
    fn energy_difference_is_minus_local_field() {
        let p = two_by_two();
        for h in [[0u8, 0], [0, 1], [1, 0], [1, 1]] {
            for i in 0..2 {
                let mut on = [0u8, 1];
                let mut off = on;
                on[i] = 1;
                off[i] = 0;
                let d = p.energy(&on, &h).unwrap() - p.energy(&off, &h).unwrap();
                assert!((d + p.local_field_visible(&h, i).unwrap()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn clamp_fill_and_base_fields() {
        let obs = IncompleteObservation::new(3, vec![1], vec![1]).unwrap();
        let cl = Clamp::from_observation(&obs);
        assert_eq!(cl.free(), &[0, 2]);
        assert_eq!(cl.full(&[1, 1]), vec![1, 1, 1]);
        let p = RbmParams::new(vec![0.0; 3], vec![0.5], vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(cl.base_hidden_fields(&p), vec![2.5]);
    }
}
