use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::MeanFieldSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Mean-field seeded clamped chains, persistent free chains, spatial estimators.
    Proposed,
    /// Uniform-initialized chains for both phases and plain sample averages.
    LossyCd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMethod {
    /// Exact enumeration when `n` is small enough, AIS otherwise.
    Auto,
    Exact,
    Ais,
    None,
}

/// Visible count up to which `EvalMethod::Auto` enumerates.
pub const AUTO_EXACT_MAX_VISIBLE: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    /// Hidden units `m`.
    pub hidden: usize,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default = "defaults::epochs")]
    pub epochs: usize,
    /// Clamped chains per datum (`K̂`).
    #[serde(default = "defaults::clamped_samples")]
    pub clamped_samples: usize,
    /// Gibbs sweeps per clamped chain (`R̂`).
    #[serde(default = "defaults::steps")]
    pub clamped_steps: usize,
    /// Free chains (`K̃`).
    #[serde(default = "defaults::free_samples")]
    pub free_samples: usize,
    /// Gibbs sweeps per free chain and update (`R̃`).
    #[serde(default = "defaults::steps")]
    pub free_steps: usize,
    /// Masking rate applied when the training data is a complete matrix.
    #[serde(default)]
    pub missing_prob: Option<f64>,
    /// Seed of the mask; defaults to `seed`.
    #[serde(default)]
    pub mask_seed: Option<u64>,
    #[serde(default = "defaults::learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "defaults::beta1")]
    pub beta1: f64,
    #[serde(default = "defaults::beta2")]
    pub beta2: f64,
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[serde(default = "defaults::mf_tol")]
    pub mf_tol: f64,
    #[serde(default = "defaults::mf_max_iter")]
    pub mf_max_iter: usize,
    #[serde(default)]
    pub mf_damping: f64,
    pub seed: u64,
    /// Log and checkpoint every this many epochs (the last epoch is always logged).
    #[serde(default = "defaults::eval_every")]
    pub eval_every: usize,
    #[serde(default = "defaults::eval")]
    pub eval: EvalMethod,
    #[serde(default = "defaults::ais_temperatures")]
    pub ais_temperatures: usize,
    #[serde(default = "defaults::ais_runs")]
    pub ais_runs: usize,
    /// Fill the `seconds` metrics column. Off by default so metrics are reproducible byte for byte.
    #[serde(default)]
    pub record_time: bool,
}

mod defaults {
    use super::EvalMethod;

    pub fn batch_size() -> usize {
        128
    }
    pub fn epochs() -> usize {
        100
    }
    pub fn clamped_samples() -> usize {
        1
    }
    pub fn steps() -> usize {
        16
    }
    pub fn free_samples() -> usize {
        128
    }
    pub fn learning_rate() -> f64 {
        0.002
    }
    pub fn beta1() -> f64 {
        0.9
    }
    pub fn beta2() -> f64 {
        0.999
    }
    pub fn epsilon() -> f64 {
        1e-8
    }
    pub fn mf_tol() -> f64 {
        1e-6
    }
    pub fn mf_max_iter() -> usize {
        1000
    }
    pub fn eval_every() -> usize {
        1
    }
    pub fn eval() -> EvalMethod {
        EvalMethod::Auto
    }
    pub fn ais_temperatures() -> usize {
        1000
    }
    pub fn ais_runs() -> usize {
        100
    }
}

impl TrainConfig {
    /// Defaults for everything but the method, hidden count and seed.
    pub fn new(method: Method, hidden: usize, seed: u64) -> Self {
        TrainConfig {
            method,
            hidden,
            batch_size: defaults::batch_size(),
            epochs: defaults::epochs(),
            clamped_samples: defaults::clamped_samples(),
            clamped_steps: defaults::steps(),
            free_samples: defaults::free_samples(),
            free_steps: defaults::steps(),
            missing_prob: None,
            mask_seed: None,
            learning_rate: defaults::learning_rate(),
            beta1: defaults::beta1(),
            beta2: defaults::beta2(),
            epsilon: defaults::epsilon(),
            mf_tol: defaults::mf_tol(),
            mf_max_iter: defaults::mf_max_iter(),
            mf_damping: 0.0,
            seed,
            eval_every: defaults::eval_every(),
            eval: defaults::eval(),
            ais_temperatures: defaults::ais_temperatures(),
            ais_runs: defaults::ais_runs(),
            record_time: false,
        }
    }

    pub fn mean_field(&self) -> MeanFieldSettings {
        MeanFieldSettings {
            tol: self.mf_tol,
            max_iter: self.mf_max_iter,
            damping: self.mf_damping,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if self.hidden == 0 {
            return bad("hidden must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.clamped_samples == 0 || self.free_samples == 0 {
            return bad("clamped_samples and free_samples must be at least 1");
        }
        if let Some(p) = self.missing_prob {
            if !(0.0..=1.0).contains(&p) {
                return bad("missing_prob must lie in [0, 1]");
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be at least 1");
        }
        if self.ais_temperatures < 2 || self.ais_runs == 0 {
            return bad("AIS needs at least 2 temperatures and 1 run");
        }
        self.mean_field().validate()
    }
}
