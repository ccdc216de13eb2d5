use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "epoch,split,loglik,grad_norm,mf_fail_rate,seconds";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub epoch: usize,
    pub split: Split,
    /// Average log-likelihood of the complete evaluation data, if evaluated.
    pub loglik: Option<f64>,
    /// Mean gradient norm over the epoch's updates; absent at epoch 0.
    pub grad_norm: Option<f64>,
    /// Fraction of mean-field solves that hit the iteration cap during the epoch.
    pub mf_fail_rate: Option<f64>,
    pub seconds: Option<f64>,
}

/// Append-only, epoch-ordered training log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    records: Vec<MetricRecord>,
}

fn cell(out: &mut String, x: Option<f64>) {
    if let Some(x) = x {
        // `{:?}` prints the shortest string that round-trips
        let _ = write!(out, "{x:?}");
    }
}

impl MetricsLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: MetricRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.epoch < last.epoch {
                return Err(Error::Domain(format!(
                    "metrics epoch {} after epoch {}",
                    record.epoch, last.epoch
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[MetricRecord] {
        &self.records
    }

    /// `(epoch, loglik)` for one split, skipping unevaluated rows.
    pub fn series(&self, split: Split) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter(|r| r.split == split)
            .filter_map(|r| r.loglik.map(|l| (r.epoch, l)))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{},{},", r.epoch, r.split.as_str());
            cell(&mut out, r.loglik);
            out.push(',');
            cell(&mut out, r.grad_norm);
            out.push(',');
            cell(&mut out, r.mf_fail_rate);
            out.push(',');
            cell(&mut out, r.seconds);
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(epoch: usize, loglik: Option<f64>) -> MetricRecord {
        MetricRecord {
            epoch,
            split: Split::Train,
            loglik,
            grad_norm: None,
            mf_fail_rate: Some(0.0),
            seconds: None,
        }
    }

    #[test]
    fn csv_layout() {
        let mut log = MetricsLog::new();
        log.push(rec(0, Some(-3.5))).unwrap();
        log.push(rec(1, None)).unwrap();
        assert_eq!(log.to_csv(), format!("{CSV_HEADER}\n0,train,-3.5,,0.0,\n1,train,,,0.0,\n"));
        assert_eq!(log.series(Split::Train), vec![(0, -3.5)]);
    }

    #[test]
    fn epochs_are_monotone() {
        let mut log = MetricsLog::new();
        log.push(rec(2, None)).unwrap();
        assert!(log.push(rec(1, None)).is_err());
    }
}
