//! Numerical kernels shared by the solvers: finite-difference gradients,
//! the block-soft proximal map, Gram-Schmidt, and the banded solver for
//! `I + λ₁·DᵗD`.

mod banded;
mod derivative;
mod orthonormal;
mod prox;
mod sparse;

pub use banded::{BandedCholesky, SmoothingSystem};
pub use derivative::{build_derivative_ops, DerivativeOperator};
pub use orthonormal::{gram_schmidt, orthonormality_residual, BasisMatrix, DEGENERATE_COLUMN_NORM};
pub use prox::block_soft;
pub use sparse::CsrMatrix;

pub(crate) use prox::{block_soft_in_place, check_threshold, soft};
