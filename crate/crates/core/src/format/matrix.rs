//! Binary matrices as text: one row per line, comma-separated `0`/`1`.

use std::path::Path;

use crate::dataset::BinaryMatrix;
use crate::error::{Error, Result};

pub fn parse_csv(text: &str) -> Result<BinaryMatrix> {
    let mut rows = Vec::new();
    let mut offset = 0u64;
    for line in text.lines() {
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            let row = trimmed
                .split(',')
                .map(|cell| match cell.trim() {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(Error::format("csv", offset, format!("expected 0 or 1, found {other:?}"))),
                })
                .collect::<Result<Vec<u8>>>()?;
            rows.push(row);
        }
        offset += line.len() as u64 + 1;
    }
    BinaryMatrix::from_rows(&rows)
}

pub fn encode_csv(matrix: &BinaryMatrix) -> String {
    let mut out = String::with_capacity(matrix.rows * (2 * matrix.cols + 1));
    for row in matrix.rows() {
        for (k, &x) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            out.push(if x != 0 { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

pub fn read_csv(path: &Path) -> Result<BinaryMatrix> {
    let bytes = super::read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|e| Error::format("csv", e.utf8_error().valid_up_to() as u64, "invalid utf-8"))?;
    parse_csv(&text)
}

pub fn write_csv(path: &Path, matrix: &BinaryMatrix) -> Result<()> {
    super::write_file(path, encode_csv(matrix).as_bytes())
}
