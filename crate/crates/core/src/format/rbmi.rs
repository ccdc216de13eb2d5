//! `RBMI`: container for incomplete binary datasets.
//!
//! ```text
//! header (16 bytes, little-endian)
//!   magic   "RBMI"
//!   version u16
//!   flags   u16   bit 0: provenance section present
//!   n       u32   visible dimension
//!   count   u32   number of observations
//! provenance (if flagged)
//!   varint length, utf-8 source, f64 threshold, f64 missing probability, u64 mask seed
//! per observation
//!   varint observed count k
//!   k varints: first index, then gaps minus one
//!   ceil(k/8) bytes of values, least significant bit first, zero padded
//! trailer (only when the body is non-empty)
//!   u32 CRC-32 of the body
//! ```

use std::path::Path;

use crate::dataset::{IncompleteDataset, IncompleteObservation, Provenance};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RBMI";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;
const FLAG_PROVENANCE: u16 = 1;

fn put_varint(out: &mut Vec<u8>, mut x: u64) {
    while x >= 0x80 {
        out.push((x as u8) | 0x80);
        x >>= 7;
    }
    out.push(x as u8);
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    /// File offset of `bytes[0]`.
    base: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::format("rbmi", (self.base + self.pos) as u64, reason)
    }

    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < k {
            return Err(self.err(format!("unexpected end of data, needed {k} more bytes")));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn varint(&mut self) -> Result<u64> {
        let start = self.pos;
        let mut x = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.take(1)?[0];
            if shift == 63 && b > 1 {
                return Err(self.err("varint overflows 64 bits"));
            }
            x |= u64::from(b & 0x7f) << shift;
            if b & 0x80 == 0 {
                if b == 0 && self.pos - start > 1 {
                    return Err(self.err("non-canonical varint"));
                }
                return Ok(x);
            }
        }
        Err(self.err("varint overflows 64 bits"))
    }

    fn u64_le(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn encode(data: &IncompleteDataset) -> Result<Vec<u8>> {
    let n = u32::try_from(data.n).map_err(|_| Error::Domain("visible dimension exceeds u32".into()))?;
    let count = u32::try_from(data.len()).map_err(|_| Error::Domain("observation count exceeds u32".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let flags = if data.provenance.is_some() { FLAG_PROVENANCE } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());

    let mut body = Vec::new();
    if let Some(p) = &data.provenance {
        put_varint(&mut body, p.source.len() as u64);
        body.extend_from_slice(p.source.as_bytes());
        body.extend_from_slice(&p.threshold.to_le_bytes());
        body.extend_from_slice(&p.missing_prob.to_le_bytes());
        body.extend_from_slice(&p.mask_seed.to_le_bytes());
    }
    for obs in &data.observations {
        if obs.n() != data.n {
            return Err(Error::DimensionMismatch {
                what: "observation length",
                expected: data.n,
                actual: obs.n(),
            });
        }
        let idx = obs.observed();
        put_varint(&mut body, idx.len() as u64);
        let mut prev: Option<usize> = None;
        for &i in idx {
            put_varint(&mut body, prev.map_or(i, |p| i - p - 1) as u64);
            prev = Some(i);
        }
        for chunk in obs.values().chunks(8) {
            body.push(chunk.iter().enumerate().fold(0u8, |acc, (k, &b)| acc | (b << k)));
        }
    }
    if !body.is_empty() {
        let crc = crc32fast::hash(&body);
        out.extend_from_slice(&body);
        out.extend_from_slice(&crc.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<IncompleteDataset> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format("rbmi", bytes.len() as u64, "header truncated"));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format("rbmi", 0, "bad magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::format("rbmi", 4, format!("unsupported version {version}, expected {VERSION}")));
    }
    let flags = u16::from_le_bytes([bytes[6], bytes[7]]);
    if flags & !FLAG_PROVENANCE != 0 {
        return Err(Error::format("rbmi", 6, format!("unknown flags {flags:#06x}")));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let count = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let rest = &bytes[HEADER_LEN..];
    let body = if rest.is_empty() {
        rest
    } else {
        if rest.len() < 4 {
            return Err(Error::format("rbmi", bytes.len() as u64, "checksum truncated"));
        }
        let (body, tail) = rest.split_at(rest.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored || body.is_empty() {
            return Err(Error::format("rbmi", (bytes.len() - 4) as u64, "checksum mismatch"));
        }
        body
    };
    let mut cur = Cursor {
        bytes: body,
        pos: 0,
        base: HEADER_LEN,
    };
    let provenance = if flags & FLAG_PROVENANCE != 0 {
        let len = cur.varint()? as usize;
        let raw = cur.take(len)?;
        let source = String::from_utf8(raw.to_vec()).map_err(|_| cur.err("provenance source is not utf-8"))?;
        Some(Provenance {
            source,
            threshold: f64::from_bits(cur.u64_le()?),
            missing_prob: f64::from_bits(cur.u64_le()?),
            mask_seed: cur.u64_le()?,
        })
    } else {
        None
    };
    let mut observations = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let k = cur.varint()? as usize;
        if k > n {
            return Err(cur.err(format!("observed count {k} exceeds dimension {n}")));
        }
        let mut idx = Vec::with_capacity(k);
        let mut prev: Option<usize> = None;
        for _ in 0..k {
            let gap = cur.varint()? as usize;
            let i = match prev {
                None => gap,
                Some(p) => p.checked_add(gap + 1).ok_or_else(|| cur.err("index overflow"))?,
            };
            if i >= n {
                return Err(cur.err(format!("index {i} out of range for dimension {n}")));
            }
            idx.push(i);
            prev = Some(i);
        }
        let packed = cur.take(k.div_ceil(8))?;
        let values: Vec<u8> = (0..k).map(|t| (packed[t / 8] >> (t % 8)) & 1).collect();
        if k % 8 != 0 && packed[k / 8] >> (k % 8) != 0 {
            return Err(cur.err("non-zero padding bits"));
        }
        observations.push(IncompleteObservation::new(n, idx, values).map_err(|e| cur.err(e.to_string()))?);
    }
    if cur.pos != body.len() {
        return Err(cur.err("trailing bytes after last observation"));
    }
    Ok(IncompleteDataset {
        n,
        observations,
        provenance,
    })
}

pub fn save(path: &Path, data: &IncompleteDataset) -> Result<()> {
    super::write_file(path, &encode(data)?)
}

pub fn load(path: &Path) -> Result<IncompleteDataset> {
    decode(&super::read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> IncompleteDataset {
        let mut d = IncompleteDataset::new(
            300,
            vec![
                IncompleteObservation::new(300, vec![0, 1, 7, 128, 299], vec![1, 0, 1, 1, 0]).unwrap(),
                IncompleteObservation::new(300, vec![], vec![]).unwrap(),
                IncompleteObservation::complete(&[1; 300]).unwrap(),
            ],
        )
        .unwrap();
        d.provenance = Some(Provenance {
            source: "digits.idx".into(),
            threshold: 127.5,
            missing_prob: 0.3,
            mask_seed: 42,
        });
        d
    }

    #[test]
    fn empty_dataset_is_header_only() {
        let d = IncompleteDataset::new(784, vec![]).unwrap();
        let bytes = encode(&d).unwrap();
        assert_eq!(bytes.len(), 16);
        assert_eq!(decode(&bytes).unwrap(), d);
    }

    #[test]
    fn fully_missing_is_a_zero_count_record() {
        let d = IncompleteDataset::new(5, vec![IncompleteObservation::new(5, vec![], vec![]).unwrap()]).unwrap();
        let bytes = encode(&d).unwrap();
        assert_eq!(&bytes[16..17], &[0]);
        assert_eq!(bytes.len(), 16 + 1 + 4);
        assert_eq!(decode(&bytes).unwrap(), d);
    }

    #[test]
    fn round_trip_with_provenance() {
        let d = sample();
        let bytes = encode(&d).unwrap();
        let back = decode(&bytes).unwrap();
        assert_eq!(back, d);
        assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn corruption_and_version_are_detected() {
        let bytes = encode(&sample()).unwrap();
        let mut flipped = bytes.clone();
        flipped[20] ^= 0x10;
        assert!(matches!(decode(&flipped), Err(Error::Format { .. })));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(decode(&v2), Err(Error::Format { offset: 4, .. })));
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode(&bytes[..10]).is_err());
    }

    #[test]
    fn varint_edges() {
        for x in [0u64, 1, 127, 128, 300, u32::MAX as u64, u64::MAX] {
            let mut buf = Vec::new();
            put_varint(&mut buf, x);
            let mut c = Cursor { bytes: &buf, pos: 0, base: 0 };
            assert_eq!(c.varint().unwrap(), x);
            assert_eq!(c.pos, buf.len());
        }
        let mut c = Cursor { bytes: &[0x80, 0x00], pos: 0, base: 0 };
        assert!(c.varint().is_err());
    }
}
