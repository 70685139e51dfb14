//! Binary model file.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size    | field                                  |
//! |--------|---------|----------------------------------------|
//! | 0      | 4       | magic `RSSL`                           |
//! | 4      | 4       | version `u32` = 1                      |
//! | 8      | 4       | `n` `u32` (pixels per patch)           |
//! | 12     | 4       | `k` `u32` (atoms)                      |
//! | 16     | 4       | `patch_size` `u32`, `n = patch_size²`  |
//! | 20     | 8·n·k   | basis as `f64`, column-major           |

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operators::BasisMatrix;

pub const MAGIC: &[u8; 4] = b"RSSL";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 20;
/// Orthonormality tolerance enforced on load.
pub const LOAD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    patch_size: usize,
    basis: BasisMatrix,
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| format_err(offset, "truncated header"))
}

impl Model {
    pub fn new(patch_size: usize, basis: BasisMatrix) -> Result<Self> {
        if patch_size * patch_size != basis.n() {
            return Err(Error::InvalidDimension(format!(
                "basis has {} rows but a {patch_size}x{patch_size} patch has {}",
                basis.n(),
                patch_size * patch_size
            )));
        }
        Ok(Self { patch_size, basis })
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn basis(&self) -> &BasisMatrix {
        &self.basis
    }

    pub fn k(&self) -> usize {
        self.basis.k()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let m = self.basis.matrix();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.len());
        out.extend_from_slice(MAGIC);
        for v in [VERSION, m.nrows() as u32, m.ncols() as u32, self.patch_size as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in m.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.get(..4) != Some(MAGIC.as_slice()) {
            return Err(format_err(0, "bad magic, expected RSSL"));
        }
        let version = read_u32(bytes, 4)?;
        if version != VERSION {
            return Err(format_err(4, format!("unsupported version {version}")));
        }
        let n = read_u32(bytes, 8)? as usize;
        let k = read_u32(bytes, 12)? as usize;
        let patch_size = read_u32(bytes, 16)? as usize;
        if patch_size.checked_mul(patch_size) != Some(n) {
            return Err(format_err(16, format!("patch size {patch_size} does not match n = {n}")));
        }
        if k == 0 || k > n {
            return Err(format_err(12, format!("atom count {k} outside 1..={n}")));
        }
        let expected = HEADER_LEN + 8 * n * k;
        if bytes.len() != expected {
            return Err(format_err(
                bytes.len().min(expected),
                format!("payload is {} bytes, expected {}", bytes.len() - HEADER_LEN, expected - HEADER_LEN),
            ));
        }
        let values: Vec<f64> = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(format_err(HEADER_LEN + 8 * i, "non-finite basis entry"));
        }
        let basis = BasisMatrix::from_orthonormal(DMatrix::from_vec(n, k, values), LOAD_TOLERANCE)?;
        Ok(Self { patch_size, basis })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
