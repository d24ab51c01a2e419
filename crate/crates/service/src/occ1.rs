//! OCC1: little-endian sparse occupancy files.
//!
//! ```text
//! magic "OCC1" | version u16 | dims u16×3 (D,H,W) | voxel_size f32 | origin f32×3 | count u64
//! count × (z u16, y u16, x u16, label u8), strictly ascending by (z, y, x)
//! ```

use std::path::Path;

use occ_core::grid::{GridSpec, SparseOccupancy, SparseRecord};
use occ_core::labels::Label;

pub const MAGIC: [u8; 4] = *b"OCC1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 36;
pub const RECORD_LEN: usize = 7;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum Occ1Error {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated: need {expected} bytes, have {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("{0} trailing bytes after the last record")]
    TrailingBytes(usize),
    #[error("record {0} is not strictly after its predecessor")]
    Unsorted(usize),
    #[error("record {0} lies outside the grid")]
    OutOfRange(usize),
    #[error("record {index} has invalid label {label}")]
    InvalidLabel { index: usize, label: u8 },
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("dims {0:?} do not fit in u16")]
    DimsTooLarge([usize; 3]),
    #[error("io: {0}")]
    Io(String),
}

impl Occ1Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Occ1Error::BadMagic(_) => "bad_magic",
            Occ1Error::UnsupportedVersion(_) => "unsupported_version",
            Occ1Error::Truncated { .. } => "truncated",
            Occ1Error::TrailingBytes(_) => "trailing_bytes",
            Occ1Error::Unsorted(_) => "unsorted",
            Occ1Error::OutOfRange(_) => "out_of_range",
            Occ1Error::InvalidLabel { .. } => "invalid_label",
            Occ1Error::InvalidSpec(_) => "invalid_spec",
            Occ1Error::DimsTooLarge(_) => "dims_too_large",
            Occ1Error::Io(_) => "io",
        }
    }
}

/// Widens a stored f32 through its shortest decimal form, so 0.2f32 reads as 0.2.
fn widen(v: f32) -> f64 {
    v.to_string().parse().expect("f32 display parses as f64")
}

pub fn write(grid: &SparseOccupancy) -> Result<Vec<u8>, Occ1Error> {
    let spec = grid.spec();
    if spec.dims.iter().any(|&d| d > u16::MAX as usize) {
        return Err(Occ1Error::DimsTooLarge(spec.dims));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * grid.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in spec.dims {
        out.extend_from_slice(&(d as u16).to_le_bytes());
    }
    out.extend_from_slice(&(spec.voxel_size as f32).to_le_bytes());
    for o in spec.origin {
        out.extend_from_slice(&(o as f32).to_le_bytes());
    }
    out.extend_from_slice(&(grid.len() as u64).to_le_bytes());
    for r in grid.records() {
        for v in [r.z, r.y, r.x] {
            out.extend_from_slice(&(v as u16).to_le_bytes());
        }
        out.push(r.label.id());
    }
    Ok(out)
}

pub fn read(bytes: &[u8]) -> Result<SparseOccupancy, Occ1Error> {
    if bytes.len() < 4 {
        return Err(Occ1Error::Truncated { expected: HEADER_LEN, actual: bytes.len() });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Occ1Error::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Occ1Error::Truncated { expected: HEADER_LEN, actual: bytes.len() });
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u16_at(4);
    if version != VERSION {
        return Err(Occ1Error::UnsupportedVersion(version));
    }
    let dims = [u16_at(6) as usize, u16_at(8) as usize, u16_at(10) as usize];
    let voxel = widen(f32_at(12));
    let origin = [widen(f32_at(16)), widen(f32_at(20)), widen(f32_at(24))];
    let count = u64::from_le_bytes(bytes[28..36].try_into().unwrap());
    let spec = GridSpec::new(origin, voxel, dims).map_err(|e| Occ1Error::InvalidSpec(e.to_string()))?;
    let expected = (count as u128) * RECORD_LEN as u128 + HEADER_LEN as u128;
    if (bytes.len() as u128) < expected {
        return Err(Occ1Error::Truncated { expected: expected.min(usize::MAX as u128) as usize, actual: bytes.len() });
    }
    let expected = expected as usize;
    if bytes.len() > expected {
        return Err(Occ1Error::TrailingBytes(bytes.len() - expected));
    }
    let mut records = Vec::with_capacity(count as usize);
    for (i, rec) in bytes[HEADER_LEN..].chunks_exact(RECORD_LEN).enumerate() {
        let z = u16::from_le_bytes([rec[0], rec[1]]) as u32;
        let y = u16::from_le_bytes([rec[2], rec[3]]) as u32;
        let x = u16::from_le_bytes([rec[4], rec[5]]) as u32;
        if !spec.contains_index([z as i64, y as i64, x as i64]) {
            return Err(Occ1Error::OutOfRange(i));
        }
        let label = match Label::new(rec[6]) {
            Some(l) if !l.is_empty() => l,
            _ => return Err(Occ1Error::InvalidLabel { index: i, label: rec[6] }),
        };
        let r = SparseRecord { z, y, x, label };
        if let Some(prev) = records.last() {
            let p: &SparseRecord = prev;
            if (p.z, p.y, p.x) >= (z, y, x) {
                return Err(Occ1Error::Unsorted(i));
            }
        }
        records.push(r);
    }
    SparseOccupancy::new(spec, records).map_err(|e| Occ1Error::InvalidSpec(e.to_string()))
}

pub fn write_file(path: &Path, grid: &SparseOccupancy) -> Result<(), Occ1Error> {
    let bytes = write(grid)?;
    std::fs::write(path, bytes).map_err(|e| Occ1Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_file(path: &Path) -> Result<SparseOccupancy, Occ1Error> {
    let bytes = std::fs::read(path).map_err(|e| Occ1Error::Io(format!("{}: {e}", path.display())))?;
    read(&bytes)
}
