//! Synthetic corpora with known outlier support.
//!
//! Each sample is a smooth background (a random combination of the first
//! `bg_rank` zigzag DCT atoms) plus vertical bars of `+outlier_mag`, plus
//! Gaussian noise, clipped to `[0, 1]`.
//!
//! Randomness comes from ChaCha8 seeded with `seed`; normals use the
//! Box-Muller transform on 53-bit uniforms. Per sample the draws are, in
//! order: the DC level, one normal per remaining atom, then for each column
//! a planting draw and (if planted) the bar length and start, then one
//! normal per pixel in row-major order (skipped when `noise_sigma = 0`).

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::learner::dct_basis;

/// Range of the mean background level.
const BG_LEVEL: (f64, f64) = (0.25, 0.45);
/// Per-pixel amplitude scale of the non-constant background atoms.
const BG_TEXTURE: f64 = 0.08;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub patch_size: usize,
    /// Number of smooth DCT atoms mixed into each background.
    pub bg_rank: usize,
    /// Probability that a column receives a bar.
    pub outlier_prob: f64,
    /// Intensity added on bar pixels.
    pub outlier_mag: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            patch_size: 32,
            bg_rank: 6,
            outlier_prob: 0.15,
            outlier_mag: 0.4,
            noise_sigma: 0.02,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 {
            return Err(Error::InvalidParameter("patch_size must be positive".into()));
        }
        if self.bg_rank == 0 || self.bg_rank > self.patch_size * self.patch_size {
            return Err(Error::InvalidParameter(format!(
                "bg_rank must lie in 1..={}",
                self.patch_size * self.patch_size
            )));
        }
        if !(0.0..=1.0).contains(&self.outlier_prob) {
            return Err(Error::InvalidParameter("outlier_prob must lie in [0, 1]".into()));
        }
        if !(self.outlier_mag >= 0.0 && self.outlier_mag.is_finite()) {
            return Err(Error::InvalidParameter("outlier_mag must be nonnegative".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidParameter("noise_sigma must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One synthetic patch.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    /// Observed patch: `clip(clean + bars + noise)`.
    pub x: DVector<f64>,
    /// Planted bar support.
    pub gt_mask: Vec<bool>,
    /// Background alone.
    pub clean: DVector<f64>,
}

/// Uniform on `[0, 1)` from the top 53 bits of one `u64`.
fn unit_uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal by Box-Muller (cosine branch); consumes two `u64`s.
pub(crate) fn standard_normal(rng: &mut impl RngCore) -> f64 {
    let u1 = 1.0 - unit_uniform(rng);
    let u2 = unit_uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn uniform_in(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit_uniform(rng)
}

/// Integer uniform on `lo..=hi`.
fn index_in(rng: &mut impl RngCore, lo: usize, hi: usize) -> usize {
    let span = (hi - lo + 1) as f64;
    lo + ((unit_uniform(rng) * span) as usize).min(hi - lo)
}

/// Generates `count` samples; identical `(spec, count)` give identical output.
pub fn gen_corpus(spec: &SynthSpec, count: usize) -> Result<Vec<SynthSample>> {
    spec.validate()?;
    let size = spec.patch_size;
    let n = size * size;
    let atoms = dct_basis(size, spec.bg_rank)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..count)
        .map(|_| Ok(gen_sample(spec, &atoms, &mut rng, size, n)))
        .collect()
}

fn gen_sample(
    spec: &SynthSpec,
    atoms: &DMatrix<f64>,
    rng: &mut ChaCha8Rng,
    size: usize,
    n: usize,
) -> SynthSample {
    let root_n = size as f64;
    let mut coeffs = DVector::zeros(spec.bg_rank);
    coeffs[0] = root_n * uniform_in(rng, BG_LEVEL.0, BG_LEVEL.1);
    for a in 1..spec.bg_rank {
        // amplitude decays with zigzag position
        coeffs[a] = root_n * BG_TEXTURE * standard_normal(rng) / (a as f64).sqrt();
    }
    let clean = atoms * coeffs;

    let mut bars = vec![0.0; n];
    let mut gt_mask = vec![false; n];
    let min_len = size.div_ceil(4);
    for c in 0..size {
        if unit_uniform(rng) < spec.outlier_prob {
            let len = index_in(rng, min_len, size);
            let start = index_in(rng, 0, size - len);
            for r in start..start + len {
                bars[r * size + c] = spec.outlier_mag;
                gt_mask[r * size + c] = spec.outlier_mag > 0.0;
            }
        }
    }

    let x = DVector::from_fn(n, |i, _| {
        let noise = if spec.noise_sigma > 0.0 {
            spec.noise_sigma * standard_normal(rng)
        } else {
            0.0
        };
        (clean[i] + bars[i] + noise).clamp(0.0, 1.0)
    });
    SynthSample { x, gt_mask, clean }
}
