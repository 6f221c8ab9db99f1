//! Binary field snapshots.
//!
//! Little-endian layout: magic `PE3D`, version `u32`, `n1 n2 nz` as `u32`,
//! `L1 L2 h t` as `f64`, component count `u32` (always 2), then `u1` and
//! `u2` in storage order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::HorizontalField;
use crate::grid::GridSpec;

pub const MAGIC: [u8; 4] = *b"PE3D";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 3 * 4 + 4 * 8 + 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotHeader {
    pub version: u32,
    pub grid: GridSpec,
    pub t: f64,
    pub components: u32,
}

impl SnapshotHeader {
    pub fn new(grid: &GridSpec, t: f64) -> Self {
        SnapshotHeader {
            version: FORMAT_VERSION,
            grid: *grid,
            t,
            components: 2,
        }
    }

    fn payload_len(&self) -> usize {
        2 * self.grid.len3() * 8
    }
}

pub fn encode_snapshot(field: &HorizontalField, header: &SnapshotHeader) -> Result<Vec<u8>> {
    field.check_grid(&header.grid)?;
    if header.components != 2 || header.version != FORMAT_VERSION {
        return Err(Error::input("snapshot header must have version 1 and 2 components"));
    }
    let g = header.grid;
    let mut out = Vec::with_capacity(HEADER_LEN + header.payload_len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&header.version.to_le_bytes());
    for n in [g.n1, g.n2, g.nz] {
        let n = u32::try_from(n).map_err(|_| Error::input("grid too large for a snapshot"))?;
        out.extend_from_slice(&n.to_le_bytes());
    }
    for x in [g.l1, g.l2, g.h, header.t] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.extend_from_slice(&header.components.to_le_bytes());
    for c in field.components() {
        for x in c {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_snapshot(bytes: &[u8], path: &Path) -> Result<(HorizontalField, SnapshotHeader)> {
    let fail = |m: String| Error::Format {
        path: path.to_path_buf(),
        message: m,
    };
    if bytes.len() < HEADER_LEN {
        return Err(fail(format!("truncated header ({} bytes)", bytes.len())));
    }
    if bytes[..4] != MAGIC {
        return Err(fail(format!("bad magic {:?}", &bytes[..4])));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let version = u32_at(4);
    if version != FORMAT_VERSION {
        return Err(fail(format!(
            "unsupported format version {version} (this build reads {FORMAT_VERSION})"
        )));
    }
    let (n1, n2, nz) = (u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize);
    let (l1, l2, h, t) = (f64_at(20), f64_at(28), f64_at(36), f64_at(44));
    let components = u32_at(52);
    if components != 2 {
        return Err(fail(format!("expected 2 components, found {components}")));
    }
    let grid = GridSpec::new(l1, l2, h, n1, n2, nz).map_err(|e| fail(format!("inconsistent dimensions: {e}")))?;
    let header = SnapshotHeader {
        version,
        grid,
        t,
        components,
    };
    let want = HEADER_LEN + header.payload_len();
    if bytes.len() != want {
        return Err(fail(format!("payload length {} does not match header (expected {want})", bytes.len())));
    }
    let n = grid.len3();
    let read = |start: usize| -> Vec<f64> {
        bytes[start..start + 8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect()
    };
    let u1 = read(HEADER_LEN);
    let u2 = read(HEADER_LEN + 8 * n);
    Ok((HorizontalField::from_components(&grid, u1, u2)?, header))
}

pub fn write_snapshot(field: &HorizontalField, header: &SnapshotHeader, path: &Path) -> Result<()> {
    fs::write(path, encode_snapshot(field, header)?)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(HorizontalField, SnapshotHeader)> {
    let bytes = fs::read(path)?;
    decode_snapshot(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (HorizontalField, SnapshotHeader) {
        let g = GridSpec::new(1.0, 2.0, 0.5, 4, 5, 6).unwrap();
        let f = HorizontalField::from_fn(&g, |x, y, z| ((x * 7.1).sin() + z, y.powi(3) - 1e-300));
        (f, SnapshotHeader::new(&g, 0.125))
    }

    #[test]
    fn round_trip_is_bitwise() {
        let (f, h) = sample();
        let bytes = encode_snapshot(&f, &h).unwrap();
        let (g, h2) = decode_snapshot(&bytes, Path::new("mem")).unwrap();
        assert_eq!(h, h2);
        for (a, b) in f.u1.iter().chain(&f.u2).zip(g.u1.iter().chain(&g.u2)) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn corrupt_inputs_are_format_errors() {
        let (f, h) = sample();
        let good = encode_snapshot(&f, &h).unwrap();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_snapshot(&bad, Path::new("m")), Err(Error::Format { .. })));
        let mut old = good.clone();
        old[4..8].copy_from_slice(&0u32.to_le_bytes());
        let e = decode_snapshot(&old, Path::new("m")).unwrap_err();
        assert!(e.to_string().contains("version"), "{e}");
        assert!(decode_snapshot(&good[..good.len() - 8], Path::new("m")).is_err());
        assert!(decode_snapshot(&good[..10], Path::new("m")).is_err());
        let mut dims = good;
        dims[8..12].copy_from_slice(&1u32.to_le_bytes());
        assert!(decode_snapshot(&dims, Path::new("m")).is_err());
    }
}
