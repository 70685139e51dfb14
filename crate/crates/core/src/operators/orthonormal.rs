//! Orthonormal bases and modified Gram-Schmidt.

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Residual norm below which a column is treated as linearly dependent.
pub const DEGENERATE_COLUMN_NORM: f64 = 1e-10;

/// An `n × k` matrix with orthonormal columns, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix(DMatrix<f64>);

impl BasisMatrix {
    /// Wraps `m` after checking `‖mᵗm − I‖∞ ≤ tol`.
    pub fn from_orthonormal(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        if m.ncols() > m.nrows() {
            return Err(Error::InvalidDimension(format!(
                "basis has {} columns but only {} rows",
                m.ncols(),
                m.nrows()
            )));
        }
        let residual = orthonormality_residual(&m);
        if !(residual <= tol) {
            return Err(Error::InvalidInput(format!(
                "columns are not orthonormal: max |PᵗP − I| = {residual:e} > {tol:e}"
            )));
        }
        Ok(Self(m))
    }

    /// Ambient dimension (pixels per patch).
    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    /// Subspace dimension.
    pub fn k(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn column(&self, j: usize) -> DVectorView<'_, f64> {
        self.0.column(j)
    }

    /// Basis spanned by the first `k` columns.
    pub fn truncate(&self, k: usize) -> Result<BasisMatrix> {
        if k == 0 || k > self.k() {
            return Err(Error::InvalidDimension(format!(
                "cannot keep {k} of {} atoms",
                self.k()
            )));
        }
        Ok(Self(self.0.columns(0, k).into_owned()))
    }

    /// `‖PᵗP − I‖∞`
    pub fn orthonormality_residual(&self) -> f64 {
        orthonormality_residual(&self.0)
    }

    /// `P α`
    pub fn reconstruct(&self, alpha: &DVector<f64>) -> DVector<f64> {
        &self.0 * alpha
    }
}

/// Largest absolute entry of `mᵗm − I`.
pub fn orthonormality_residual(m: &DMatrix<f64>) -> f64 {
    let g = m.tr_mul(m);
    let mut worst = 0.0f64;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Modified Gram-Schmidt with one re-orthogonalization pass per column.
///
/// A column whose residual norm drops below [`DEGENERATE_COLUMN_NORM`] is
/// replaced by a pseudo-random unit vector drawn from ChaCha8 seeded with
/// the column index, orthogonalized against the columns before it.
pub fn gram_schmidt(m: &DMatrix<f64>) -> Result<BasisMatrix> {
    let (n, k) = m.shape();
    if k > n {
        return Err(Error::InvalidDimension(format!(
            "cannot orthonormalize {k} columns in dimension {n}"
        )));
    }
    let mut q = m.clone();
    for j in 0..k {
        let mut v = q.column(j).into_owned();
        let mut norm = orthogonalize_against(&q, j, &mut v);
        if !(norm >= DEGENERATE_COLUMN_NORM) {
            let mut rng = ChaCha8Rng::seed_from_u64(j as u64);
            loop {
                v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
                norm = orthogonalize_against(&q, j, &mut v);
                // A random draw lands in the span of j < n columns with probability zero.
                if norm >= DEGENERATE_COLUMN_NORM {
                    break;
                }
            }
        }
        v /= norm;
        q.set_column(j, &v);
    }
    Ok(BasisMatrix(q))
}

/// Removes the components of `v` along the first `j` columns of `q`
/// (two MGS passes) and returns the remaining norm.
fn orthogonalize_against(q: &DMatrix<f64>, j: usize, v: &mut DVector<f64>) -> f64 {
    for _ in 0..2 {
        for i in 0..j {
            let qi = q.column(i);
            let r = qi.dot(v);
            v.axpy(-r, &qi, 1.0);
        }
    }
    v.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_fixed() {
        let q = gram_schmidt(&DMatrix::identity(5, 5)).unwrap();
        assert_eq!(q.matrix(), &DMatrix::identity(5, 5));
    }

    #[test]
    fn two_by_two_hand_values() {
        let m = DMatrix::from_column_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let q = gram_schmidt(&m).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let expect = DMatrix::from_column_slice(2, 2, &[s, s, -s, s]);
        assert!((q.matrix() - expect).abs().max() < 1e-15);
    }

    #[test]
    fn too_many_columns_rejected() {
        assert!(matches!(
            gram_schmidt(&DMatrix::zeros(3, 4)),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn large_random_matrix_is_orthonormal_and_spans_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = DMatrix::from_fn(1024, 64, |_, _| rng.gen_range(-1.0..1.0));
        let q = gram_schmidt(&m).unwrap();
        assert!(q.orthonormality_residual() <= 1e-10);
        // every input column lies in span(Q)
        let proj = q.matrix() * q.matrix().tr_mul(&m);
        assert!((proj - &m).abs().max() < 1e-10);
    }

    #[test]
    fn rank_deficient_columns_are_reseeded() {
        let mut m = DMatrix::zeros(6, 3);
        m.set_column(0, &DVector::from_element(6, 1.0));
        m.set_column(1, &DVector::from_element(6, 2.0));
        let q = gram_schmidt(&m).unwrap();
        assert!(q.orthonormality_residual() <= 1e-10);
        let again = gram_schmidt(&m).unwrap();
        assert_eq!(q, again);
    }

    #[test]
    fn idempotent_up_to_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = DMatrix::from_fn(40, 7, |_, _| rng.gen_range(-1.0..1.0));
        let q = gram_schmidt(&m).unwrap();
        let q2 = gram_schmidt(q.matrix()).unwrap();
        for j in 0..q.k() {
            let a = q.column(j);
            let b = q2.column(j);
            let same = (a - b).abs().max();
            let flipped = (a + b).abs().max();
            assert!(same.min(flipped) < 1e-12);
        }
    }

    #[test]
    fn from_orthonormal_validates() {
        assert!(BasisMatrix::from_orthonormal(DMatrix::identity(3, 2), 1e-12).is_ok());
        let bad = DMatrix::from_element(3, 2, 1.0);
        assert!(BasisMatrix::from_orthonormal(bad, 1e-6).is_err());
        let q = BasisMatrix::from_orthonormal(DMatrix::identity(4, 3), 0.0).unwrap();
        assert_eq!(q.truncate(2).unwrap().k(), 2);
        assert!(q.truncate(4).is_err());
        assert!(q.truncate(0).is_err());
    }
}
