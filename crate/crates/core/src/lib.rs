//! Robust subspace learning for image patches corrupted by sparse,
//! nonnegative, column-connected outliers, and foreground segmentation
//! with the learned subspace.
//!
//! A patch `x` (row-major, intensities in `[0, 1]`) is modelled as
//! `x = Pα + s + ε` with an orthonormal basis `P`, smooth background
//! `Pα`, outliers `s ≥ 0`, and noise `ε`. [`learner::train`] fits `P` to a
//! corpus; [`decomposition::decompose`] splits a new patch for a fixed `P`.

pub mod cli;
pub mod decomposition;
pub mod error;
pub mod imageio;
pub mod learner;
pub mod metrics;
pub mod model;
pub mod operators;
pub mod patching;
pub mod segment;
pub mod synth;

pub use decomposition::{decompose, Decomposer, Decomposition, GroupStructure, HyperParams};
pub use error::{Error, Result};
pub use learner::{train, Init, TrainConfig, TrainReport};
pub use model::Model;
pub use operators::{BasisMatrix, DerivativeOperator};
pub use patching::{BinaryImage, GrayImage};
