//! Banded Cholesky factorization for the smoothing system `I + λ₁·DᵗD`.

use super::derivative::DerivativeOperator;
use crate::error::{check_len, Error, Result};

/// Cholesky factor `L` of a symmetric positive definite band matrix.
/// Row `i` stores `L[i, i-b..=i]` contiguously (entries left of column 0
/// are zero padding).
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bandwidth: usize,
    lower: Vec<f64>,
}

impl BandedCholesky {
    /// Factors the `n × n` matrix whose `(i, j)` entry is `entry(i, j)`
    /// for `|i − j| ≤ bandwidth` and zero elsewhere.
    pub fn factor(n: usize, bandwidth: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let b = bandwidth;
        let stride = b + 1;
        let mut lower = vec![0.0; n * stride];
        for i in 0..n {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let jlo = j.saturating_sub(b).max(lo);
                let mut sum = entry(i, j);
                for k in jlo..j {
                    sum -= lower[i * stride + (k + b - i)] * lower[j * stride + (k + b - j)];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(Error::Numerical(format!(
                            "matrix is not positive definite (pivot {sum} at row {i})"
                        )));
                    }
                    lower[i * stride + b] = sum.sqrt();
                } else {
                    lower[i * stride + (j + b - i)] = sum / lower[j * stride + b];
                }
            }
        }
        Ok(Self {
            n,
            bandwidth: b,
            lower,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L Lᵗ x = rhs` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, b) = (self.n, self.bandwidth);
        let stride = b + 1;
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let row = &self.lower[i * stride..(i + 1) * stride];
            let mut sum = x[i];
            for k in lo..i {
                sum -= row[k + b - i] * x[k];
            }
            x[i] = sum / row[b];
        }
        for i in (0..n).rev() {
            let hi = (i + b).min(n - 1);
            let mut sum = x[i];
            for k in i + 1..=hi {
                sum -= self.lower[k * stride + (i + b - k)] * x[k];
            }
            x[i] = sum / self.lower[i * stride + b];
        }
    }
}

/// Factored `I + λ₁·DᵗD` for one patch geometry.
#[derive(Debug, Clone)]
pub struct SmoothingSystem {
    lambda1: f64,
    chol: BandedCholesky,
}

impl SmoothingSystem {
    pub fn new(dop: &DerivativeOperator, lambda1: f64) -> Result<Self> {
        super::prox::check_threshold("lambda1", lambda1)?;
        let dtd = dop.dtd();
        let bandwidth = dtd.bandwidth();
        let chol = BandedCholesky::factor(dop.len(), bandwidth, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id + lambda1 * dtd.get(i, j)
        })?;
        Ok(Self { lambda1, chol })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    /// Solves `(I + λ₁ DᵗD) x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len(self.chol.dim(), rhs.len())?;
        let mut x = rhs.to_vec();
        self.chol.solve_in_place(&mut x);
        Ok(x)
    }

    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        self.chol.solve_in_place(x);
    }
}
