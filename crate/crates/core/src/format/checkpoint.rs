//! Parameter checkpoints.
//!
//! Layout (little-endian): magic `RBMC`, version u16, reserved u16 (zero),
//! n u32, m u32, seed u64, epoch u64, then `b` (n × f64), `c` (m × f64) and
//! `W` (n·m × f64, row-major), followed by a CRC-32 of everything before it.

use std::path::Path;

use crate::error::{Error, Result};
use crate::rbm::RbmParams;

pub const MAGIC: &[u8; 4] = b"RBMC";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: RbmParams,
    pub seed: u64,
    pub epoch: u64,
}

pub fn encode(ck: &Checkpoint) -> Vec<u8> {
    let p = &ck.params;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * p.num_params() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(p.n() as u32).to_le_bytes());
    out.extend_from_slice(&(p.m() as u32).to_le_bytes());
    out.extend_from_slice(&ck.seed.to_le_bytes());
    out.extend_from_slice(&ck.epoch.to_le_bytes());
    for x in p.visible_bias().iter().chain(p.hidden_bias()).chain(p.weights()) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let bad = |offset: usize, reason: String| Error::format("checkpoint", offset as u64, reason);
    if bytes.len() < HEADER_LEN {
        return Err(bad(bytes.len(), "header truncated".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad(0, "bad magic".into()));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let version = u16_at(4);
    if version != VERSION {
        return Err(bad(4, format!("unsupported version {version}, expected {VERSION}")));
    }
    let (n, m) = (u32_at(8) as usize, u32_at(12) as usize);
    let count = n
        .checked_mul(m)
        .and_then(|nm| nm.checked_add(n + m))
        .ok_or_else(|| bad(8, "dimensions overflow".into()))?;
    let expected = HEADER_LEN + 8 * count + 4;
    if bytes.len() != expected {
        return Err(bad(bytes.len(), format!("expected {expected} bytes")));
    }
    let body = &bytes[..expected - 4];
    if crc32fast::hash(body) != u32_at(expected - 4) {
        return Err(bad(expected - 4, "checksum mismatch".into()));
    }
    let floats: Vec<f64> = body[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let params = RbmParams::new(floats[..n].to_vec(), floats[n..n + m].to_vec(), floats[n + m..].to_vec())?;
    Ok(Checkpoint {
        params,
        seed: u64_at(16),
        epoch: u64_at(24),
    })
}

pub fn save(path: &Path, ck: &Checkpoint) -> Result<()> {
    super::write_file(path, &encode(ck))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    decode(&super::read_file(path)?)
}
