//! File-driven training runs.
//!
//! ```toml
//! [data]
//! train = "train.csv"        # complete matrix (.csv or IDX) or an .rbmi file
//! eval_train = "train.csv"   # optional complete data for scoring
//! eval_test = "test.csv"     # optional
//! threshold = 127.5          # binarization threshold for IDX input
//!
//! [output]
//! checkpoint = "model.rbmc"
//! metrics = "metrics.csv"
//!
//! [train]
//! method = "proposed"        # or "lossy-cd"
//! hidden = 8
//! seed = 1
//! missing_prob = 0.3         # masks complete training input
//! ```
//!
//! Relative paths resolve against the config file's directory. When the
//! training input is a complete matrix it is masked with `missing_prob`
//! and `mask_seed` (default: `seed`), and the unmasked matrix is scored
//! unless `eval_train` says otherwise. Unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dataset::{apply_mask, IncompleteDataset, IncompleteObservation, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::format::{self, rbmi};
use crate::rbm::RbmParams;
use crate::trainer::{train, EvalSets, MetricsLog, TrainConfig};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub train: PathBuf,
    #[serde(default)]
    pub eval_train: Option<PathBuf>,
    #[serde(default)]
    pub eval_test: Option<PathBuf>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    #[serde(default = "empty_output")]
    pub output: OutputSection,
    pub train: TrainConfig,
}

fn empty_output() -> OutputSection {
    OutputSection {
        checkpoint: None,
        metrics: None,
    }
}

fn is_rbmi(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("rbmi"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    /// Reads `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut cfg.data.train);
        cfg.data.eval_train.as_mut().map(fix);
        cfg.data.eval_test.as_mut().map(fix);
        cfg.output.checkpoint.as_mut().map(fix);
        cfg.output.metrics.as_mut().map(fix);
        Ok(cfg)
    }
}

/// Complete observations from a matrix file or a fully observed `.rbmi` file.
pub fn load_complete(path: &Path, threshold: f64) -> Result<Vec<IncompleteObservation>> {
    if is_rbmi(path) {
        let data = rbmi::load(path)?;
        if let Some(k) = data.observations.iter().position(|o| !o.is_complete()) {
            return Err(Error::InvalidObservation(format!(
                "{}: datum {k} has missing entries",
                path.display()
            )));
        }
        return Ok(data.observations);
    }
    Ok(IncompleteDataset::from_complete(&format::load_binary_matrix(path, threshold)?).observations)
}

/// Training data and evaluation sets described by `cfg`.
pub fn prepare(cfg: &RunConfig) -> Result<(IncompleteDataset, EvalSets)> {
    let d = &cfg.data;
    let (data, default_eval) = if is_rbmi(&d.train) {
        if cfg.train.missing_prob.is_some() {
            return Err(Error::Config("missing_prob applies only to complete training input".into()));
        }
        (rbmi::load(&d.train)?, None)
    } else {
        let matrix = format::load_binary_matrix(&d.train, d.threshold)?;
        let p = cfg.train.missing_prob.unwrap_or(0.0);
        let mut data = apply_mask(&matrix, p, cfg.train.mask_seed.unwrap_or(cfg.train.seed))?;
        if let Some(prov) = data.provenance.as_mut() {
            prov.source = d.train.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            prov.threshold = d.threshold;
        }
        (data, Some(IncompleteDataset::from_complete(&matrix).observations))
    };
    let train = match &d.eval_train {
        Some(p) => load_complete(p, d.threshold)?,
        None => default_eval.unwrap_or_default(),
    };
    let test = d.eval_test.as_ref().map(|p| load_complete(p, d.threshold)).transpose()?;
    Ok((data, EvalSets { train, test }))
}

/// Loads data, trains, and writes the configured outputs.
pub fn execute(cfg: &RunConfig) -> Result<(RbmParams, MetricsLog)> {
    let (data, eval) = prepare(cfg)?;
    let eval = (!eval.train.is_empty() || eval.test.is_some()).then_some(eval);
    let (params, log) = train(&cfg.train, &data, eval.as_ref(), cfg.output.checkpoint.as_deref())?;
    if let Some(path) = &cfg.output.metrics {
        log.write_csv(path)?;
    }
    Ok((params, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let text = "[data]\ntrain = \"x.csv\"\n[train]\nmethod = \"proposed\"\nhidden = 3\nseed = 2\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.data.threshold, 127.5);
        assert!(cfg.output.checkpoint.is_none());
        assert!(RunConfig::parse(&format!("{text}bogus = 1\n")).is_err());
        assert!(RunConfig::parse(&text.replace("[data]", "[data]\nextra = 2")).is_err());
        assert!(RunConfig::parse(&text.replace("hidden = 3", "hidden = 0")).is_err());
    }
}
