//! On-disk formats.

pub mod checkpoint;
pub mod idx;
pub mod matrix;
pub mod rbmi;

use std::path::Path;

use crate::dataset::{binarize, BinaryMatrix};
use crate::error::Result;

/// Reads a complete binary matrix: `.csv` files as 0/1 text, anything else
/// as an IDX image archive thresholded at `threshold`.
pub fn load_binary_matrix(path: &Path, threshold: f64) -> Result<BinaryMatrix> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => matrix::read_csv(path),
        _ => Ok(binarize(&idx::read_images(path)?, threshold)),
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| crate::error::Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| crate::error::Error::io(path, e))
}
