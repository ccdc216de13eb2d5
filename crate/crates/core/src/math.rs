//! Numerically stable scalar kernels shared by every estimator and sampler.

use crate::error::{Error, Result};

/// Logistic function `1 / (1 + e^{-x})`, evaluated on the branch that never
/// exponentiates a positive argument.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`; equals `x` to machine precision once `x` is large.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Inverse of [`sigmoid`]. Defined on the open interval `(0, 1)` only.
///
/// Accuracy is limited by the representation of `p` itself: near 1 the
/// spacing of doubles bounds how much of `1 - p` survives, so
/// `logit(sigmoid(x))` loses relative accuracy for large positive `x`.
pub fn logit(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("logit requires p in (0, 1), got {p}")));
    }
    // For p >= 1/2, 1 - p is exact (Sterbenz), so this is the best available.
    Ok(p.ln() - (-p).ln_1p())
}

/// `ln Σ e^{x_k}` with max-shift. Returns `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `ln((1/K) Σ e^{x_k})` with max-shift.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NEG_INFINITY;
    }
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

/// Streaming log-sum-exp accumulator with a running maximum.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    pub(crate) fn new() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, x: f64) {
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    pub(crate) fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}
