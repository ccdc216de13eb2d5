//! AdaMax, used for gradient ascent.

use crate::error::{Error, Result};
use crate::rbm::{Gradient, RbmParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaMax {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdaMax {
    fn default() -> Self {
        AdaMax {
            learning_rate: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    /// First-moment estimate.
    pub moment: Gradient,
    /// Exponentially weighted infinity norm.
    pub inf_norm: Gradient,
    pub step: u64,
}

fn step_slice(theta: &mut [f64], m: &mut [f64], u: &mut [f64], g: &[f64], rule: &AdaMax, rate: f64) {
    for k in 0..theta.len() {
        m[k] = rule.beta1 * m[k] + (1.0 - rule.beta1) * g[k];
        u[k] = (rule.beta2 * u[k]).max(g[k].abs());
        theta[k] += rate * m[k] / (u[k] + rule.epsilon);
    }
}

impl OptimizerState {
    pub fn new(n: usize, m: usize) -> Self {
        OptimizerState {
            moment: Gradient::zeros(n, m),
            inf_norm: Gradient::zeros(n, m),
            step: 0,
        }
    }

    /// One ascent step: `θ ← θ + α/(1-β₁ᵗ) · m / (u + ε)`.
    pub fn update(&mut self, params: &mut RbmParams, grad: &Gradient, rule: &AdaMax) -> Result<()> {
        let (n, m) = (params.n(), params.m());
        if grad.b.len() != n || grad.c.len() != m || grad.w.len() != n * m || self.moment.b.len() != n || self.moment.c.len() != m {
            return Err(Error::DimensionMismatch {
                what: "gradient",
                expected: params.num_params(),
                actual: grad.b.len() + grad.c.len() + grad.w.len(),
            });
        }
        self.step += 1;
        let rate = rule.learning_rate / (1.0 - rule.beta1.powf(self.step as f64));
        let (b, c, w) = params.parts_mut();
        step_slice(b, &mut self.moment.b, &mut self.inf_norm.b, &grad.b, rule, rate);
        step_slice(c, &mut self.moment.c, &mut self.inf_norm.c, &grad.c, rule, rate);
        step_slice(w, &mut self.moment.w, &mut self.inf_norm.w, &grad.w, rule, rate);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = RbmParams::new(vec![0.5, -1.0], vec![0.25], vec![1.0, 2.0]).unwrap();
        let before = p.clone();
        let mut st = OptimizerState::new(2, 1);
        for _ in 0..50 {
            st.update(&mut p, &Gradient::zeros(2, 1), &AdaMax::default()).unwrap();
        }
        assert_eq!(p, before);
        assert!(st.inf_norm.iter().all(|&u| u >= 0.0));
    }

    #[test]
    fn first_step_is_signed_learning_rate() {
        let mut p = RbmParams::zeros(2, 1);
        let mut st = OptimizerState::new(2, 1);
        let g = Gradient {
            b: vec![3.0, -0.5],
            c: vec![1e-3],
            w: vec![-7.0, 2.0],
        };
        let rule = AdaMax::default();
        st.update(&mut p, &g, &rule).unwrap();
        let expect = |x: f64| rule.learning_rate * x / (x.abs() + rule.epsilon);
        assert!((p.visible_bias()[0] - expect(3.0)).abs() < 1e-15);
        assert!((p.visible_bias()[1] - expect(-0.5)).abs() < 1e-15);
        assert!((p.weights()[0] - expect(-7.0)).abs() < 1e-15);
        assert!((p.visible_bias()[0] - 0.002).abs() < 1e-10);
    }

    #[test]
    fn ascends_a_concave_toy_objective() {
        // f(θ) = -(θ - 1.3)² on the hidden bias, maximized at 1.3
        let mut p = RbmParams::zeros(1, 1);
        let mut st = OptimizerState::new(1, 1);
        let rule = AdaMax {
            learning_rate: 0.01,
            ..AdaMax::default()
        };
        for _ in 0..5000 {
            let theta = p.hidden_bias()[0];
            let g = Gradient {
                b: vec![0.0],
                c: vec![-2.0 * (theta - 1.3)],
                w: vec![0.0],
            };
            st.update(&mut p, &g, &rule).unwrap();
        }
        assert!((p.hidden_bias()[0] - 1.3).abs() < 1e-3);
    }

    #[test]
    fn dimension_mismatch() {
        let mut p = RbmParams::zeros(2, 1);
        let mut st = OptimizerState::new(2, 1);
        assert!(st.update(&mut p, &Gradient::zeros(1, 1), &AdaMax::default()).is_err());
    }
}
