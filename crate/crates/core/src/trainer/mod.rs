//! Minibatch training loop for both methods.

pub mod config;
pub mod gradient;
pub mod metrics;
pub mod optimizer;

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::ais::{ais_log_partition, complete_data_log_likelihood, AisConfig};
use crate::dataset::{IncompleteDataset, IncompleteObservation};
use crate::error::{Error, Result};
use crate::format::checkpoint::{self, Checkpoint};
use crate::oracle::exact_log_likelihood;
use crate::rbm::{Gradient, RbmParams};
use crate::rng::{tags, RngStream};
use crate::sampler::PersistentChains;

pub use config::{EvalMethod, Method, TrainConfig};
pub use gradient::{approx_gradient_lossycd, approx_gradient_proposed, assemble_gradient, MeanFieldTally};
pub use metrics::{MetricRecord, MetricsLog, Split};
pub use optimizer::{AdaMax, OptimizerState};

/// Couplings `N(0, 2/(n+m))`, biases zero.
pub fn xavier_init(n: usize, m: usize, stream: RngStream) -> Result<RbmParams> {
    if n == 0 || m == 0 {
        return Err(Error::Domain("layer sizes must be positive".into()));
    }
    let normal = Normal::new(0.0, (2.0 / (n + m) as f64).sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
    let mut rng = stream.rng();
    let w = (0..n * m).map(|_| normal.sample(&mut rng)).collect();
    RbmParams::new(vec![0.0; n], vec![0.0; m], w)
}

/// Complete data used to score the model while training.
#[derive(Debug, Clone, Default)]
pub struct EvalSets {
    pub train: Vec<IncompleteObservation>,
    pub test: Option<Vec<IncompleteObservation>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpochStats {
    pub updates: usize,
    pub mean_grad_norm: f64,
    pub mean_field: MeanFieldTally,
    pub seconds: f64,
}

/// Training state: parameters, optimizer moments, persistent chains and
/// the update counter that keys every random stream.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    cfg: TrainConfig,
    data: &'a IncompleteDataset,
    params: RbmParams,
    opt: OptimizerState,
    chains: PersistentChains,
    master: RngStream,
    updates: u64,
    epoch: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: &TrainConfig, data: &'a IncompleteDataset) -> Result<Self> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(Error::Domain("training data is empty".into()));
        }
        let master = RngStream::new(cfg.seed);
        let params = xavier_init(data.n, cfg.hidden, master.derive(tags::INIT))?;
        Ok(Trainer {
            opt: OptimizerState::new(data.n, cfg.hidden),
            chains: PersistentChains::uniform(data.n, cfg.free_samples, master.derive(tags::PCD_INIT)),
            cfg: cfg.clone(),
            data,
            params,
            master,
            updates: 0,
            epoch: 0,
        })
    }

    pub fn params(&self) -> &RbmParams {
        &self.params
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// One gradient evaluation and optimizer step on the given data indices.
    pub fn update(&mut self, batch: &[usize]) -> Result<(Gradient, MeanFieldTally)> {
        let obs: Vec<&IncompleteObservation> = batch.iter().map(|&k| &self.data.observations[k]).collect();
        let stream = self.master.derive(tags::UPDATE).derive(self.updates);
        let (grad, tally) = match self.cfg.method {
            Method::Proposed => approx_gradient_proposed(&self.params, &obs, &mut self.chains, &self.cfg, stream)?,
            Method::LossyCd => (approx_gradient_lossycd(&self.params, &obs, &self.cfg, stream)?, MeanFieldTally::default()),
        };
        let rule = AdaMax {
            learning_rate: self.cfg.learning_rate,
            beta1: self.cfg.beta1,
            beta2: self.cfg.beta2,
            epsilon: self.cfg.epsilon,
        };
        self.opt.update(&mut self.params, &grad, &rule)?;
        self.updates += 1;
        if !self.params.is_finite() {
            return Err(Error::Domain(format!("parameters became non-finite at update {}", self.updates)));
        }
        Ok((grad, tally))
    }

    /// Shuffles the data and makes one pass in minibatches.
    pub fn run_epoch(&mut self) -> Result<EpochStats> {
        let start = Instant::now();
        let mut order: Vec<usize> = (0..self.data.len()).collect();
        let mut rng = self.master.derive(tags::SHUFFLE).derive(self.epoch as u64).rng();
        order.shuffle(&mut rng);
        let mut stats = EpochStats::default();
        let mut norm_sum = 0.0;
        for batch in order.chunks(self.cfg.batch_size) {
            let (g, t) = self.update(batch)?;
            norm_sum += g.norm();
            stats.updates += 1;
            stats.mean_field.solves += t.solves;
            stats.mean_field.failures += t.failures;
        }
        stats.mean_grad_norm = norm_sum / stats.updates as f64;
        stats.seconds = start.elapsed().as_secs_f64();
        self.epoch += 1;
        Ok(stats)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            params: self.params.clone(),
            seed: self.cfg.seed,
            epoch: self.epoch as u64,
        }
    }

    pub fn into_params(self) -> RbmParams {
        self.params
    }
}

fn resolve_eval(cfg: &TrainConfig, n: usize) -> EvalMethod {
    match cfg.eval {
        EvalMethod::Auto if n <= config::AUTO_EXACT_MAX_VISIBLE => EvalMethod::Exact,
        EvalMethod::Auto => EvalMethod::Ais,
        other => other,
    }
}

/// Log-likelihoods of the evaluation sets under `params`, `(train, test)`.
pub fn evaluate(
    params: &RbmParams,
    sets: &EvalSets,
    method: EvalMethod,
    cfg: &TrainConfig,
    stream: RngStream,
) -> Result<(Option<f64>, Option<f64>)> {
    let method = if method == EvalMethod::Auto { resolve_eval(cfg, params.n()) } else { method };
    match method {
        EvalMethod::None | EvalMethod::Auto => Ok((None, None)),
        EvalMethod::Exact => {
            let train = exact_log_likelihood(params, &sets.train)?;
            let test = sets.test.as_ref().map(|t| exact_log_likelihood(params, t)).transpose()?;
            Ok((Some(train), test))
        }
        EvalMethod::Ais => {
            let ais = AisConfig {
                num_temperatures: cfg.ais_temperatures,
                num_runs: cfg.ais_runs,
            };
            let log_z = ais_log_partition(params, &ais, stream)?.log_z;
            let train = complete_data_log_likelihood(params, &sets.train, log_z)?;
            let test = sets
                .test
                .as_ref()
                .map(|t| complete_data_log_likelihood(params, t, log_z))
                .transpose()?;
            Ok((Some(train), test))
        }
    }
}

fn log_epoch(
    log: &mut MetricsLog,
    trainer: &Trainer,
    eval: Option<&EvalSets>,
    cfg: &TrainConfig,
    stats: Option<&EpochStats>,
    elapsed: f64,
) -> Result<()> {
    let method = resolve_eval(cfg, trainer.params.n());
    let (train, test) = match eval {
        Some(sets) if !sets.train.is_empty() => evaluate(
            &trainer.params,
            sets,
            method,
            cfg,
            trainer.master.derive(tags::EVAL).derive(trainer.epoch as u64),
        )?,
        _ => (None, None),
    };
    let mf_fail_rate = match (cfg.method, stats) {
        (Method::Proposed, Some(s)) if s.mean_field.solves > 0 => {
            Some(s.mean_field.failures as f64 / s.mean_field.solves as f64)
        }
        (Method::Proposed, Some(_)) => Some(0.0),
        _ => None,
    };
    let record = |split, loglik| MetricRecord {
        epoch: trainer.epoch,
        split,
        loglik,
        grad_norm: stats.map(|s| s.mean_grad_norm),
        mf_fail_rate,
        seconds: cfg.record_time.then_some(elapsed),
    };
    log.push(record(Split::Train, train))?;
    if eval.is_some_and(|e| e.test.is_some()) {
        log.push(record(Split::Test, test))?;
    }
    Ok(())
}

/// Trains from Xavier initialization for `cfg.epochs` epochs. Metrics are
/// logged at epoch 0, every `eval_every` epochs and after the last epoch;
/// the checkpoint, if requested, is rewritten at each logged epoch.
pub fn train(
    cfg: &TrainConfig,
    data: &IncompleteDataset,
    eval: Option<&EvalSets>,
    checkpoint_path: Option<&Path>,
) -> Result<(RbmParams, MetricsLog)> {
    let mut trainer = Trainer::new(cfg, data)?;
    let mut log = MetricsLog::new();
    let mut elapsed = 0.0;
    log_epoch(&mut log, &trainer, eval, cfg, None, elapsed)?;
    if let Some(path) = checkpoint_path {
        checkpoint::save(path, &trainer.checkpoint())?;
    }
    for e in 1..=cfg.epochs {
        let stats = trainer.run_epoch()?;
        elapsed += stats.seconds;
        if e % cfg.eval_every == 0 || e == cfg.epochs {
            log_epoch(&mut log, &trainer, eval, cfg, Some(&stats), elapsed)?;
            if let Some(path) = checkpoint_path {
                checkpoint::save(path, &trainer.checkpoint())?;
            }
        }
    }
    Ok((trainer.into_params(), log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> IncompleteDataset {
        let rows = [[1u8, 0, 1, 1], [0, 1, 1, 0], [1, 1, 0, 0], [0, 0, 1, 1], [1, 0, 0, 1]];
        let obs = rows
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let mask: Vec<bool> = (0..4).map(|i| (i + k) % 3 != 0).collect();
                IncompleteObservation::from_mask(r, &mask).unwrap()
            })
            .collect();
        IncompleteDataset::new(4, obs).unwrap()
    }

    #[test]
    fn xavier_statistics() {
        let p = xavier_init(784, 100, RngStream::new(3)).unwrap();
        let w = p.weights();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
        assert!((var / (2.0 / 884.0) - 1.0).abs() < 0.1);
        assert!(p.visible_bias().iter().chain(p.hidden_bias()).all(|&x| x == 0.0));
        assert_eq!(p, xavier_init(784, 100, RngStream::new(3)).unwrap());
        assert!(xavier_init(0, 1, RngStream::new(0)).is_err());
    }

    #[test]
    fn zero_epochs_returns_the_initialization() {
        let data = tiny();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::new(Method::Proposed, 2, 11)
        };
        let (p, log) = train(&cfg, &data, None, None).unwrap();
        assert_eq!(p, xavier_init(4, 2, RngStream::new(11).derive(tags::INIT)).unwrap());
        assert_eq!(log.records().len(), 1);
    }

    #[test]
    fn training_is_deterministic() {
        let data = tiny();
        let eval = EvalSets {
            train: data.observations.iter().map(|o| IncompleteObservation::complete(&o.dense()).unwrap()).collect(),
            test: None,
        };
        for method in [Method::Proposed, Method::LossyCd] {
            let cfg = TrainConfig {
                epochs: 3,
                batch_size: 2,
                free_samples: 4,
                ..TrainConfig::new(method, 2, 5)
            };
            let a = train(&cfg, &data, Some(&eval), None).unwrap();
            let b = train(&cfg, &data, Some(&eval), None).unwrap();
            assert_eq!(a.0, b.0);
            assert_eq!(a.1.to_csv(), b.1.to_csv());
            assert_eq!(a.1.series(Split::Train).len(), 4);
        }
    }

    #[test]
    fn empty_data_is_rejected() {
        let data = IncompleteDataset::new(3, vec![]).unwrap();
        assert!(train(&TrainConfig::new(Method::Proposed, 2, 0), &data, None, None).is_err());
    }
}
