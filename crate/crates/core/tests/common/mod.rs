#![allow(dead_code)]

use rand_distr::{Distribution, Normal};

use rbm_missing::dataset::{BinaryMatrix, IncompleteDataset};
use rbm_missing::oracle::ExactSampler;
use rbm_missing::{IncompleteObservation, RbmParams, RngStream};

/// A planted machine with couplings `N(0, scale²)` and biases `N(0, (0.3 scale)²)`,
/// plus `count` exact samples from it.
pub fn planted(n: usize, m: usize, count: usize, scale: f64, seed: u64) -> (RbmParams, BinaryMatrix) {
    let mut rng = RngStream::new(seed).rng();
    let normal = Normal::new(0.0, scale).unwrap();
    let w: Vec<f64> = (0..n * m).map(|_| normal.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..n).map(|_| 0.3 * normal.sample(&mut rng)).collect();
    let c: Vec<f64> = (0..m).map(|_| 0.3 * normal.sample(&mut rng)).collect();
    let params = RbmParams::new(b, c, w).unwrap();
    let sampler = ExactSampler::free(&params).unwrap();
    let rows: Vec<Vec<u8>> = (0..count).map(|_| sampler.draw(&mut rng)).collect();
    (params, BinaryMatrix::from_rows(&rows).unwrap())
}

pub fn complete(matrix: &BinaryMatrix) -> Vec<IncompleteObservation> {
    IncompleteDataset::from_complete(matrix).observations
}
