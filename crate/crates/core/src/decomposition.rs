//! Per-sample sparse decomposition `x ≈ Pα + s` with a fixed basis.
//!
//! The objective for one sample is
//!
//! ```text
//! ½‖x − Pα − s‖² + (λ₁/2)‖D P α‖² + λ₂‖s‖₁ + λ₃ Σ_m ‖s_{g_m}‖₂
//! ```
//!
//! with `s ≥ 0` when [`HyperParams::nonneg_s`] is set. Both block updates
//! below are exact minimizers of this objective over their block, so
//! alternating them never increases it.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_len, Error, Result};
use crate::operators::{block_soft_in_place, check_threshold, soft, BasisMatrix, DerivativeOperator};

/// Intensity units in which the CLI weights `λ₂`, `λ₃` are quoted.
pub const GRAY_LEVELS: f64 = 255.0;

/// Default foreground threshold on `s` for `[0, 1]` intensities.
pub const DEFAULT_TAU: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    /// Smoothness weight on `‖D P α‖²`.
    pub lambda1: f64,
    /// Elementwise sparsity weight on `s`.
    pub lambda2: f64,
    /// Column-group weight on `s`.
    pub lambda3: f64,
    pub max_iters: usize,
    /// Stop once the relative objective change falls below this.
    pub rel_tol: f64,
    pub nonneg_s: bool,
}

impl Default for HyperParams {
    /// `λ = (0.5, 1, 2)` with `λ₂`, `λ₃` in 8-bit gray levels, for data in `[0, 1]`.
    fn default() -> Self {
        Self::from_gray_levels(0.5, 1.0, 2.0)
    }
}

impl HyperParams {
    /// Weights given as if intensities were 0–255, rescaled for `[0, 1]` data.
    /// `λ₁` is scale-free; the `ℓ₁` and group weights scale with intensity.
    pub fn from_gray_levels(lambda1: f64, lambda2: f64, lambda3: f64) -> Self {
        Self {
            lambda1,
            lambda2: lambda2 / GRAY_LEVELS,
            lambda3: lambda3 / GRAY_LEVELS,
            max_iters: 100,
            rel_tol: 1e-6,
            nonneg_s: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_threshold("lambda1", self.lambda1)?;
        check_threshold("lambda2", self.lambda2)?;
        check_threshold("lambda3", self.lambda3)?;
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

/// Disjoint index sets covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupStructure {
    n: usize,
    groups: Vec<Vec<usize>>,
}

impl GroupStructure {
    pub fn new(n: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for g in &groups {
            for &i in g {
                if i >= n {
                    return Err(Error::InvalidInput(format!("group index {i} outside 0..{n}")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidInput(format!("index {i} appears in two groups")));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidInput(format!("index {missing} is not in any group")));
        }
        Ok(Self { n, groups })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// `Σ_m ‖v_{g_m}‖₂`
    pub fn group_norm_sum(&self, v: &[f64]) -> f64 {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt())
            .sum()
    }
}

/// Result of [`decompose`].
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub alpha: DVector<f64>,
    pub s: DVector<f64>,
    /// Objective at the start, then after every α update and every s
    /// update: `[f₀, f(α₁), f(s₁), f(α₂), f(s₂), …]`.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

impl Decomposition {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial value")
    }
}

/// Objective terms given a precomputed reconstruction `Pα`.
pub(crate) fn objective_from_recon(
    x: &[f64],
    recon: &[f64],
    s: &[f64],
    dop: &DerivativeOperator,
    groups: &GroupStructure,
    hp: &HyperParams,
) -> f64 {
    let data: f64 = x
        .iter()
        .zip(recon)
        .zip(s)
        .map(|((xi, ri), si)| (xi - ri - si).powi(2))
        .sum();
    let smooth = dop.gradient_energy_unchecked(recon);
    let l1: f64 = s.iter().map(|v| v.abs()).sum();
    0.5 * data + 0.5 * hp.lambda1 * smooth + hp.lambda2 * l1 + hp.lambda3 * groups.group_norm_sum(s)
}

fn check_shapes(
    p: &BasisMatrix,
    dop: &DerivativeOperator,
    groups: &GroupStructure,
    x: &[f64],
) -> Result<()> {
    check_len(p.n(), dop.len())?;
    check_len(p.n(), groups.len())?;
    check_len(p.n(), x.len())
}

/// Per-sample objective `½‖x − Pα − s‖² + (λ₁/2)‖DPα‖² + λ₂‖s‖₁ + λ₃Σ‖s_g‖₂`.
pub fn objective(
    p: &BasisMatrix,
    alpha: &DVector<f64>,
    s: &DVector<f64>,
    x: &DVector<f64>,
    dop: &DerivativeOperator,
    groups: &GroupStructure,
    hp: &HyperParams,
) -> Result<f64> {
    check_shapes(p, dop, groups, x.as_slice())?;
    check_len(p.k(), alpha.len())?;
    check_len(p.n(), s.len())?;
    let recon = p.reconstruct(alpha);
    Ok(objective_from_recon(
        x.as_slice(),
        recon.as_slice(),
        s.as_slice(),
        dop,
        groups,
        hp,
    ))
}

/// Cached factorization of `PᵗP + λ₁ PᵗDᵗDP` for the α update.
#[derive(Debug, Clone)]
pub struct AlphaSolver {
    basis: BasisMatrix,
    system: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl AlphaSolver {
    pub fn new(p: &BasisMatrix, dop: &DerivativeOperator, lambda1: f64) -> Result<Self> {
        check_threshold("lambda1", lambda1)?;
        check_len(p.n(), dop.len())?;
        let (n, k) = (p.n(), p.k());
        let mut dtdp = DMatrix::zeros(n, k);
        for j in 0..k {
            let col = p.column(j).into_owned();
            let mut out = vec![0.0; n];
            dop.apply_dtd_into(col.as_slice(), &mut out);
            dtdp.set_column(j, &DVector::from_vec(out));
        }
        let mut system = p.matrix().tr_mul(p.matrix()) + p.matrix().tr_mul(&dtdp) * lambda1;
        // Symmetrize away rounding so the factorization sees an exactly symmetric matrix.
        system = (&system + system.transpose()) * 0.5;
        let chol = Cholesky::new(system.clone())
            .ok_or_else(|| Error::Numerical("alpha system is not positive definite".into()))?;
        Ok(Self {
            basis: p.clone(),
            system,
            chol,
        })
    }

    pub fn basis(&self) -> &BasisMatrix {
        &self.basis
    }

    /// Minimizer of `½‖x − s − Pα‖² + (λ₁/2)‖DPα‖²` given `Pᵗ(x − s)`.
    pub fn solve_projected(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut alpha = self.chol.solve(rhs);
        // one step of iterative refinement
        let residual = rhs - &self.system * &alpha;
        alpha += self.chol.solve(&residual);
        alpha
    }

    /// Column-wise [`solve_projected`](Self::solve_projected) for a `k × m` right-hand side.
    pub fn solve_many(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut alpha = self.chol.solve(rhs);
        let residual = rhs - &self.system * &alpha;
        alpha += self.chol.solve(&residual);
        alpha
    }

    /// Closed-form α update for sample `x` with outlier estimate `s`.
    pub fn solve(&self, x: &DVector<f64>, s: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.basis.n(), x.len())?;
        check_len(self.basis.n(), s.len())?;
        Ok(self.solve_projected(&self.basis.matrix().tr_mul(&(x - s))))
    }
}

/// `α* = (PᵗP + λ₁PᵗDᵗDP)⁻¹ Pᵗ(x − s)`
pub fn update_alpha(
    p: &BasisMatrix,
    x: &DVector<f64>,
    s: &DVector<f64>,
    dop: &DerivativeOperator,
    lambda1: f64,
) -> Result<DVector<f64>> {
    AlphaSolver::new(p, dop, lambda1)?.solve(x, s)
}

/// Exact minimizer of `½‖r − s‖² + λ₂‖s‖₁ + λ₃‖s‖₂` for one group.
///
/// With `nonneg` the `ℓ₁` term is linear on `s ≥ 0`, so the minimizer is the
/// block-soft of the nonnegative part of `r − λ₂𝟙`. Without it, each entry
/// is soft-thresholded by `λ₂` before the block shrink.
pub fn update_s_group(r_gm: &[f64], lambda2: f64, lambda3: f64, nonneg: bool) -> Result<Vec<f64>> {
    check_threshold("lambda2", lambda2)?;
    check_threshold("lambda3", lambda3)?;
    let mut out = r_gm.to_vec();
    shrink_group(&mut out, lambda2, lambda3, nonneg);
    Ok(out)
}

fn shrink_group(v: &mut [f64], lambda2: f64, lambda3: f64, nonneg: bool) {
    if nonneg {
        v.iter_mut().for_each(|e| *e = (*e - lambda2).max(0.0));
    } else {
        v.iter_mut().for_each(|e| *e = soft(*e, lambda2));
    }
    block_soft_in_place(v, lambda3);
}

/// Updates every group of `s` from the residual `x − Pα` (stored in `s` on entry).
pub(crate) fn update_s_in_place(
    residual_to_s: &mut [f64],
    groups: &GroupStructure,
    hp: &HyperParams,
) {
    let mut buf = Vec::new();
    for g in groups.groups() {
        buf.clear();
        buf.extend(g.iter().map(|&i| residual_to_s[i]));
        shrink_group(&mut buf, hp.lambda2, hp.lambda3, hp.nonneg_s);
        for (&i, &v) in g.iter().zip(&buf) {
            residual_to_s[i] = v;
        }
    }
}

/// Foreground mask: `mask[i] = s[i] > tau`.
pub fn mask_from_s(s: &[f64], tau: f64) -> Vec<bool> {
    s.iter().map(|&v| v > tau).collect()
}

/// Fixed-basis decomposition reusing one cached α factorization across samples.
#[derive(Debug, Clone)]
pub struct Decomposer<'a> {
    alpha_solver: AlphaSolver,
    dop: &'a DerivativeOperator,
    groups: &'a GroupStructure,
    hp: HyperParams,
}

impl<'a> Decomposer<'a> {
    pub fn new(
        p: &BasisMatrix,
        dop: &'a DerivativeOperator,
        groups: &'a GroupStructure,
        hp: HyperParams,
    ) -> Result<Self> {
        hp.validate()?;
        check_len(p.n(), dop.len())?;
        check_len(p.n(), groups.len())?;
        Ok(Self {
            alpha_solver: AlphaSolver::new(p, dop, hp.lambda1)?,
            dop,
            groups,
            hp,
        })
    }

    pub fn hyper_params(&self) -> &HyperParams {
        &self.hp
    }

    /// Block coordinate descent from `α = 0, s = 0`.
    pub fn decompose(&self, x: &DVector<f64>) -> Result<Decomposition> {
        let p = self.alpha_solver.basis();
        check_len(p.n(), x.len())?;
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("sample entry {i} is not finite")));
        }
        let eval = |recon: &DVector<f64>, s: &DVector<f64>| {
            objective_from_recon(
                x.as_slice(),
                recon.as_slice(),
                s.as_slice(),
                self.dop,
                self.groups,
                &self.hp,
            )
        };
        let mut alpha = DVector::zeros(p.k());
        let mut s = DVector::zeros(p.n());
        let mut recon = DVector::zeros(p.n());
        let mut trace = vec![eval(&recon, &s)];
        let mut iterations = 0;
        while iterations < self.hp.max_iters {
            let previous = *trace.last().unwrap();
            alpha = self.alpha_solver.solve(x, &s)?;
            recon = p.reconstruct(&alpha);
            trace.push(eval(&recon, &s));

            s = x - &recon;
            update_s_in_place(s.as_mut_slice(), self.groups, &self.hp);
            let current = eval(&recon, &s);
            trace.push(current);
            iterations += 1;

            if converged(previous, current, self.hp.rel_tol) {
                break;
            }
        }
        Ok(Decomposition {
            alpha,
            s,
            objective_trace: trace,
            iterations,
        })
    }
}

pub(crate) fn converged(previous: f64, current: f64, rel_tol: f64) -> bool {
    let change = (previous - current).abs();
    change == 0.0 || change < rel_tol * previous.abs()
}

/// Decomposes `x` against a fixed basis.
pub fn decompose(
    p: &BasisMatrix,
    x: &DVector<f64>,
    dop: &DerivativeOperator,
    groups: &GroupStructure,
    hp: &HyperParams,
) -> Result<Decomposition> {
    Decomposer::new(p, dop, groups, *hp)?.decompose(x)
}
