//! Incomplete observations, complete binary matrices, binarization and masking.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// One data point: the observed visible indices and their binary values.
/// The missing set is the complement of `observed` in `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncompleteObservation {
    n: usize,
    observed: Vec<usize>,
    values: Vec<u8>,
}

impl IncompleteObservation {
    pub fn new(n: usize, observed: Vec<usize>, values: Vec<u8>) -> Result<Self> {
        if observed.len() != values.len() {
            return Err(Error::InvalidObservation(format!(
                "{} observed indices but {} values",
                observed.len(),
                values.len()
            )));
        }
        for w in observed.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidObservation(
                    "observed indices must be strictly increasing".into(),
                ));
            }
        }
        if let Some(&last) = observed.last() {
            if last >= n {
                return Err(Error::IndexOutOfRange {
                    what: "observed index",
                    index: last,
                    len: n,
                });
            }
        }
        if values.iter().any(|&x| x > 1) {
            return Err(Error::InvalidObservation("values must be 0 or 1".into()));
        }
        Ok(IncompleteObservation {
            n,
            observed,
            values,
        })
    }

    pub fn complete(bits: &[u8]) -> Result<Self> {
        Self::new(bits.len(), (0..bits.len()).collect(), bits.to_vec())
    }

    /// Builds an observation from a full vector and a per-coordinate
    /// "observed" mask.
    pub fn from_mask(bits: &[u8], observed: &[bool]) -> Result<Self> {
        if bits.len() != observed.len() {
            return Err(Error::DimensionMismatch {
                what: "mask",
                expected: bits.len(),
                actual: observed.len(),
            });
        }
        let mut idx = Vec::new();
        let mut vals = Vec::new();
        for (i, (&b, &o)) in bits.iter().zip(observed).enumerate() {
            if o {
                idx.push(i);
                vals.push(b);
            }
        }
        Self::new(bits.len(), idx, vals)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn missing(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n - self.observed.len());
        let mut it = self.observed.iter().peekable();
        for i in 0..self.n {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        out
    }

    pub fn num_missing(&self) -> usize {
        self.n - self.observed.len()
    }

    pub fn is_complete(&self) -> bool {
        self.observed.len() == self.n
    }

    /// Full-length visible vector with observed values and zeros elsewhere.
    pub fn dense(&self) -> Vec<u8> {
        let mut v = vec![0u8; self.n];
        for (&i, &x) in self.observed.iter().zip(&self.values) {
            v[i] = x;
        }
        v
    }

    /// Observed value at `i`, if any.
    pub fn value_at(&self, i: usize) -> Option<u8> {
        self.observed.binary_search(&i).ok().map(|k| self.values[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub source: String,
    pub threshold: f64,
    pub missing_prob: f64,
    pub mask_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncompleteDataset {
    pub n: usize,
    pub observations: Vec<IncompleteObservation>,
    pub provenance: Option<Provenance>,
}

impl IncompleteDataset {
    pub fn new(n: usize, observations: Vec<IncompleteObservation>) -> Result<Self> {
        for o in &observations {
            if o.n() != n {
                return Err(Error::DimensionMismatch {
                    what: "observation length",
                    expected: n,
                    actual: o.n(),
                });
            }
        }
        Ok(IncompleteDataset {
            n,
            observations,
            provenance: None,
        })
    }

    pub fn from_complete(matrix: &BinaryMatrix) -> Self {
        let observations = matrix
            .rows()
            .map(|r| IncompleteObservation::complete(r).expect("binary rows"))
            .collect();
        IncompleteDataset {
            n: matrix.cols,
            observations,
            provenance: None,
        }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn missing_fraction(&self) -> f64 {
        let total = self.n * self.len();
        if total == 0 {
            return 0.0;
        }
        let missing: usize = self.observations.iter().map(|o| o.num_missing()).sum();
        missing as f64 / total as f64
    }
}

/// Row-major matrix of bits, one data point per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    pub rows: usize,
    pub cols: usize,
    pub bits: Vec<u8>,
}

impl BinaryMatrix {
    pub fn new(rows: usize, cols: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "binary matrix payload",
                expected: rows * cols,
                actual: bits.len(),
            });
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Domain("binary matrix entries must be 0 or 1".into()));
        }
        Ok(BinaryMatrix { rows, cols, bits })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut bits = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    what: "row length",
                    expected: cols,
                    actual: r.len(),
                });
            }
            bits.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, bits)
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.bits[r * self.cols..(r + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        // chunks_exact panics on zero; an empty-column matrix has no payload anyway
        (0..self.rows).map(move |r| self.row(r))
    }
}

/// Grayscale images, row-major, one image per row of `rows * cols` pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl GrayImages {
    pub fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, k: usize) -> &[u8] {
        let p = self.pixels_per_image();
        &self.pixels[k * p..(k + 1) * p]
    }
}

pub const DEFAULT_THRESHOLD: f64 = 127.5;

/// Pixel strictly above `threshold` maps to 1.
pub fn binarize(images: &GrayImages, threshold: f64) -> BinaryMatrix {
    let bits = images
        .pixels
        .iter()
        .map(|&p| u8::from(f64::from(p) > threshold))
        .collect();
    BinaryMatrix {
        rows: images.count,
        cols: images.pixels_per_image(),
        bits,
    }
}

/// Masks each entry independently with probability `p`. The mask is a
/// function of `(matrix, p, seed)` only.
pub fn apply_mask(matrix: &BinaryMatrix, p: f64, seed: u64) -> Result<IncompleteDataset> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("missing probability must lie in [0, 1], got {p}")));
    }
    let mut rng = RngStream::new(seed).rng();
    let mut observations = Vec::with_capacity(matrix.rows);
    let mut observed = vec![false; matrix.cols];
    for row in matrix.rows() {
        for o in observed.iter_mut() {
            // one uniform per entry, row-major, so p = 0 and p = 1 are exact
            let u: f64 = rng.random();
            *o = u >= p;
        }
        observations.push(IncompleteObservation::from_mask(row, &observed)?);
    }
    Ok(IncompleteDataset {
        n: matrix.cols,
        observations,
        provenance: Some(Provenance {
            source: String::new(),
            threshold: DEFAULT_THRESHOLD,
            missing_prob: p,
            mask_seed: seed,
        }),
    })
}
