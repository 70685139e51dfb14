//! Forward-difference gradient operators on row-major patches.

use super::sparse::CsrMatrix;
use crate::error::{check_len, Error, Result};

/// Horizontal and vertical forward differences for an `height × width`
/// patch, with a replicate boundary (last column of `dx` and last row of
/// `dy` are zero rows). `dtd` caches `dxᵗdx + dyᵗdy`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeOperator {
    height: usize,
    width: usize,
    dx: CsrMatrix,
    dy: CsrMatrix,
    dtd: CsrMatrix,
}

impl DerivativeOperator {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidDimension(format!(
                "derivative operator needs a nonempty patch, got {height}x{width}"
            )));
        }
        let n = height * width;
        let mut dx_rows = Vec::with_capacity(n);
        let mut dy_rows = Vec::with_capacity(n);
        for r in 0..height {
            for c in 0..width {
                let idx = r * width + c;
                dx_rows.push(if c + 1 < width {
                    vec![(idx, -1.0), (idx + 1, 1.0)]
                } else {
                    Vec::new()
                });
                dy_rows.push(if r + 1 < height {
                    vec![(idx, -1.0), (idx + width, 1.0)]
                } else {
                    Vec::new()
                });
            }
        }
        let dx = CsrMatrix::from_rows(n, dx_rows);
        let dy = CsrMatrix::from_rows(n, dy_rows);
        let dtd = dx.gram().add(&dy.gram());
        Ok(Self {
            height,
            width,
            dx,
            dy,
            dtd,
        })
    }

    /// Operator for a square `size × size` patch.
    pub fn square(size: usize) -> Result<Self> {
        Self::new(size, size)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of pixels `N`.
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> &CsrMatrix {
        &self.dx
    }

    pub fn dy(&self) -> &CsrMatrix {
        &self.dy
    }

    pub fn dtd(&self) -> &CsrMatrix {
        &self.dtd
    }

    /// `D v = [dx v; dy v]`, length `2N`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), v.len())?;
        let n = self.len();
        let mut out = vec![0.0; 2 * n];
        let (gx, gy) = out.split_at_mut(n);
        self.dx.mul_vec_into(v, gx);
        self.dy.mul_vec_into(v, gy);
        Ok(out)
    }

    /// `Dᵗ g` for a stacked gradient `g` of length `2N`.
    pub fn apply_transpose(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_len(2 * self.len(), g.len())?;
        let n = self.len();
        let mut out = vec![0.0; n];
        self.dx.mul_transpose_acc(&g[..n], &mut out);
        self.dy.mul_transpose_acc(&g[n..], &mut out);
        Ok(out)
    }

    /// `out = DᵗD v` without length checks; callers guarantee sizes.
    pub(crate) fn apply_dtd_into(&self, v: &[f64], out: &mut [f64]) {
        self.dtd.mul_vec_into(v, out);
    }

    pub fn apply_dtd(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), v.len())?;
        Ok(self.dtd.mul_vec(v))
    }

    /// `‖D v‖₂²`, evaluated directly from the forward differences.
    pub(crate) fn gradient_energy_unchecked(&self, v: &[f64]) -> f64 {
        let (h, w) = (self.height, self.width);
        let mut acc = 0.0;
        for r in 0..h {
            let row = &v[r * w..(r + 1) * w];
            for c in 0..w {
                if c + 1 < w {
                    let d = row[c + 1] - row[c];
                    acc += d * d;
                }
                if r + 1 < h {
                    let d = v[(r + 1) * w + c] - row[c];
                    acc += d * d;
                }
            }
        }
        acc
    }

    pub fn gradient_energy(&self, v: &[f64]) -> Result<f64> {
        check_len(self.len(), v.len())?;
        Ok(self.gradient_energy_unchecked(v))
    }
}

/// Builds the difference operators for an `height × width` patch.
pub fn build_derivative_ops(height: usize, width: usize) -> Result<DerivativeOperator> {
    DerivativeOperator::new(height, width)
}
