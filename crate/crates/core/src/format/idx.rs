//! IDX image archives (`u8` pixels, three dimensions, big-endian header).

use std::path::Path;

use crate::dataset::GrayImages;
use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
const HEADER_LEN: usize = 16;

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|s| u32::from_be_bytes([s[0], s[1], s[2], s[3]]))
        .ok_or_else(|| Error::format("idx", bytes.len() as u64, format!("header truncated, expected {HEADER_LEN} bytes")))
}

pub fn parse_images(bytes: &[u8]) -> Result<GrayImages> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format("idx", 0, format!("bad magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let len = count
        .checked_mul(rows)
        .and_then(|x| x.checked_mul(cols))
        .ok_or_else(|| Error::format("idx", 4, "dimensions overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < len {
        return Err(Error::format(
            "idx",
            bytes.len() as u64,
            format!("payload truncated: {} of {len} pixel bytes present", payload.len()),
        ));
    }
    if payload.len() > len {
        return Err(Error::format("idx", (HEADER_LEN + len) as u64, "trailing bytes after payload"));
    }
    Ok(GrayImages {
        count,
        rows,
        cols,
        pixels: payload.to_vec(),
    })
}

pub fn encode_images(images: &GrayImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + images.pixels.len());
    for x in [IMAGE_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&x.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn read_images(path: &Path) -> Result<GrayImages> {
    parse_images(&super::read_file(path)?)
}

pub fn write_images(path: &Path, images: &GrayImages) -> Result<()> {
    super::write_file(path, &encode_images(images))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two() -> GrayImages {
        GrayImages {
            count: 2,
            rows: 2,
            cols: 3,
            pixels: (0..12).map(|k| (k * 21) as u8).collect(),
        }
    }

    #[test]
    fn round_trip() {
        let img = two();
        let bytes = encode_images(&img);
        assert_eq!(bytes.len(), 16 + 12);
        assert_eq!(parse_images(&bytes).unwrap(), img);
    }

    #[test]
    fn truncation_names_offset() {
        let bytes = encode_images(&two());
        match parse_images(&bytes[..20]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 20),
            other => panic!("{other:?}"),
        }
        match parse_images(&bytes[..10]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 10),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode_images(&two());
        bytes[3] = 0x01;
        assert!(matches!(parse_images(&bytes), Err(Error::Format { offset: 0, .. })));
    }
}
