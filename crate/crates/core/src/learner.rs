//! Subspace learning by alternating minimization over the per-sample
//! coefficients `α_i`, the outliers `s_i`, and the columns of `P`.
//!
//! One outer sweep updates every `α_i` (closed form), then every group of
//! every `s_i`, then each column of `P` in turn, and finally re-orthonormalizes
//! `P` with Gram-Schmidt.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::decomposition::{
    converged, objective_from_recon, update_s_in_place, AlphaSolver, GroupStructure, HyperParams,
};
use crate::error::{check_len, Error, Result};
use crate::operators::{gram_schmidt, BasisMatrix, DerivativeOperator, SmoothingSystem};
use crate::synth::standard_normal;

/// Columns whose `Σ_i α_i(j)²` falls below this are left unchanged.
pub const DEAD_ATOM_ENERGY: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Init {
    /// Low-frequency 2-D DCT-II atoms in zigzag order.
    #[default]
    Dct,
    /// Seeded Gaussian matrix, orthonormalized.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub k: usize,
    pub hp: HyperParams,
    pub outer_iters: usize,
    pub seed: u64,
    pub init: Init,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 64,
            hp: HyperParams {
                rel_tol: 1e-4,
                ..HyperParams::default()
            },
            outer_iters: 50,
            seed: 0,
            init: Init::Dct,
        }
    }
}

/// Dataset objective at the four checkpoints of one outer sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepTrace {
    pub start: f64,
    pub after_alpha: f64,
    pub after_s: f64,
    /// After the column sweep and Gram-Schmidt.
    pub after_basis: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Dataset objective at the end of each outer sweep.
    pub objective_per_iter: Vec<f64>,
    pub orthonormality_residual_per_iter: Vec<f64>,
    pub sweeps: Vec<SweepTrace>,
    /// Seconds since training started, at the end of each sweep.
    pub elapsed_per_iter: Vec<f64>,
    /// Total seconds.
    pub wall_time: f64,
}

/// Zigzag (JPEG) ordering of the frequency pairs `(row, col)` of a `size × size` block.
pub fn zigzag_order(size: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(size * size);
    for d in 0..size.saturating_mul(2).saturating_sub(1) {
        let lo = d.saturating_sub(size - 1);
        let hi = d.min(size - 1);
        if d % 2 == 0 {
            for r in (lo..=hi).rev() {
                out.push((r, d - r));
            }
        } else {
            for r in lo..=hi {
                out.push((r, d - r));
            }
        }
    }
    out
}

/// The first `count` orthonormal 2-D DCT-II basis images of a `size × size`
/// patch in zigzag order, vectorized row-major as matrix columns.
pub fn dct_basis(size: usize, count: usize) -> Result<DMatrix<f64>> {
    let n = size * size;
    if size == 0 || count > n {
        return Err(Error::InvalidDimension(format!(
            "cannot take {count} DCT atoms of a {size}x{size} patch"
        )));
    }
    let scale = |u: usize| {
        if u == 0 {
            (1.0 / size as f64).sqrt()
        } else {
            (2.0 / size as f64).sqrt()
        }
    };
    let cosines = |u: usize| -> Vec<f64> {
        (0..size)
            .map(|x| {
                scale(u) * (std::f64::consts::PI * (2 * x + 1) as f64 * u as f64 / (2 * size) as f64).cos()
            })
            .collect()
    };
    let mut m = DMatrix::zeros(n, count);
    for (j, &(fu, fv)) in zigzag_order(size).iter().take(count).enumerate() {
        let cu = cosines(fu);
        let cv = cosines(fv);
        for r in 0..size {
            for c in 0..size {
                m[(r * size + c, j)] = cu[r] * cv[c];
            }
        }
    }
    Ok(m)
}

/// Initial basis; deterministic in `(n, k, init, seed)`.
pub fn init_subspace(n: usize, k: usize, init: Init, seed: u64) -> Result<BasisMatrix> {
    if k == 0 || k > n {
        return Err(Error::InvalidDimension(format!(
            "subspace dimension {k} must lie in 1..={n}"
        )));
    }
    let size = (n as f64).sqrt().round() as usize;
    if size * size != n {
        return Err(Error::InvalidDimension(format!(
            "{n} pixels is not a square patch"
        )));
    }
    let m = match init {
        Init::Dct => dct_basis(size, k)?,
        Init::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            DMatrix::from_fn(n, k, |_, _| standard_normal(&mut rng))
        }
    };
    gram_schmidt(&m)
}

/// Sufficient statistics for the closed-form update of column `j`.
struct ColumnStats {
    /// `Σ_i α_i(j) (x_i − s_i)`
    weighted_data: DVector<f64>,
    /// `Σ_i α_i(j) α_i`
    coeff_gram: DVector<f64>,
}

/// `p_j = (I + λ₁DᵗD)⁻¹ β_j / Σ_i α_i(j)²` with
/// `β_j = Σ_i α_i(j) η_{i,j} − λ₁ α_i(j) Dᵗ γ_{i,j}`.
///
/// Summing over samples first, `Σ_i α_i(j) Σ_{k≠j} p_k α_i(k) = P g − p_j g_j`
/// where `g = Σ_i α_i(j) α_i`, so only the statistics in `stats` are needed.
fn solve_column(
    j: usize,
    p: &DMatrix<f64>,
    stats: &ColumnStats,
    dop: &DerivativeOperator,
    smoothing: &SmoothingSystem,
) -> DVector<f64> {
    let energy = stats.coeff_gram[j];
    if !(energy >= DEAD_ATOM_ENERGY) {
        return p.column(j).into_owned();
    }
    let n = p.nrows();
    // others = Σ_i α_i(j) Σ_{k≠j} p_k α_i(k)
    let mut others = DVector::zeros(n);
    for k in 0..stats.coeff_gram.len() {
        if k != j {
            others.axpy(stats.coeff_gram[k], &p.column(k), 1.0);
        }
    }
    let mut smooth = vec![0.0; n];
    dop.apply_dtd_into(others.as_slice(), &mut smooth);
    let lambda1 = smoothing.lambda1();
    let mut beta: Vec<f64> = (0..n)
        .map(|i| stats.weighted_data[i] - others[i] - lambda1 * smooth[i])
        .collect();
    smoothing.solve_in_place(&mut beta);
    DVector::from_vec(beta) / energy
}

/// Closed-form minimizer over column `j` of `P` with the other columns,
/// all `α_i`, and all `s_i` held fixed.
pub fn update_column(
    j: usize,
    p: &BasisMatrix,
    samples: &[DVector<f64>],
    alphas: &[DVector<f64>],
    ss: &[DVector<f64>],
    dop: &DerivativeOperator,
    lambda1: f64,
) -> Result<DVector<f64>> {
    let (n, k) = (p.n(), p.k());
    if j >= k {
        return Err(Error::InvalidDimension(format!("column {j} of a rank-{k} basis")));
    }
    check_len(n, dop.len())?;
    check_len(samples.len(), alphas.len())?;
    check_len(samples.len(), ss.len())?;
    let mut weighted_data = DVector::zeros(n);
    let mut coeff_gram = DVector::zeros(k);
    for ((x, a), s) in samples.iter().zip(alphas).zip(ss) {
        check_len(n, x.len())?;
        check_len(n, s.len())?;
        check_len(k, a.len())?;
        let aj = a[j];
        weighted_data += (x - s) * aj;
        coeff_gram.axpy(aj, a, 1.0);
    }
    let smoothing = SmoothingSystem::new(dop, lambda1)?;
    let stats = ColumnStats {
        weighted_data,
        coeff_gram,
    };
    Ok(solve_column(j, p.matrix(), &stats, dop, &smoothing))
}

/// Column-per-sample state of a training run.
struct Corpus<'a> {
    n: usize,
    x: DMatrix<f64>,
    s: DMatrix<f64>,
    alpha: DMatrix<f64>,
    recon: DMatrix<f64>,
    dop: &'a DerivativeOperator,
    groups: &'a GroupStructure,
    hp: HyperParams,
}

impl Corpus<'_> {
    fn objective(&self) -> f64 {
        let n = self.n;
        let parts: Vec<f64> = self
            .x
            .as_slice()
            .par_chunks(n)
            .zip(self.recon.as_slice().par_chunks(n))
            .zip(self.s.as_slice().par_chunks(n))
            .map(|((x, r), s)| objective_from_recon(x, r, s, self.dop, self.groups, &self.hp))
            .collect();
        parts.iter().sum()
    }

    fn alpha_sweep(&mut self, p: &BasisMatrix, solver: &AlphaSolver) {
        let rhs = p.matrix().tr_mul(&(&self.x - &self.s));
        self.alpha = solver.solve_many(&rhs);
        self.recon = p.matrix() * &self.alpha;
    }

    fn s_sweep(&mut self) {
        let n = self.n;
        let groups = self.groups;
        let hp = self.hp;
        self.s
            .as_mut_slice()
            .par_chunks_mut(n)
            .zip(self.x.as_slice().par_chunks(n))
            .zip(self.recon.as_slice().par_chunks(n))
            .for_each(|((s, x), r)| {
                for ((si, xi), ri) in s.iter_mut().zip(x).zip(r) {
                    *si = xi - ri;
                }
                update_s_in_place(s, groups, &hp);
            });
    }

    /// Cyclic column updates followed by Gram-Schmidt.
    fn basis_sweep(&mut self, p: &BasisMatrix, smoothing: &SmoothingSystem) -> Result<BasisMatrix> {
        let weighted = (&self.x - &self.s) * self.alpha.transpose();
        let gram = &self.alpha * self.alpha.transpose();
        let mut cols = p.matrix().clone();
        for j in 0..cols.ncols() {
            let stats = ColumnStats {
                weighted_data: weighted.column(j).into_owned(),
                coeff_gram: gram.column(j).into_owned(),
            };
            let updated = solve_column(j, &cols, &stats, self.dop, smoothing);
            cols.set_column(j, &updated);
        }
        let q = gram_schmidt(&cols)?;
        self.recon = q.matrix() * &self.alpha;
        Ok(q)
    }
}

/// Learns a `cfg.k`-dimensional orthonormal basis from `samples`.
pub fn train(
    samples: &[DVector<f64>],
    cfg: &TrainConfig,
    dop: &DerivativeOperator,
    groups: &GroupStructure,
) -> Result<(BasisMatrix, TrainReport)> {
    train_with_progress(samples, cfg, dop, groups, |_, _| {})
}

/// [`train`], calling `progress(iteration, report_so_far)` after every sweep.
pub fn train_with_progress(
    samples: &[DVector<f64>],
    cfg: &TrainConfig,
    dop: &DerivativeOperator,
    groups: &GroupStructure,
    mut progress: impl FnMut(usize, &TrainReport),
) -> Result<(BasisMatrix, TrainReport)> {
    let started = Instant::now();
    cfg.hp.validate()?;
    if cfg.outer_iters == 0 {
        return Err(Error::InvalidParameter("outer_iters must be at least 1".into()));
    }
    let n = dop.len();
    check_len(n, groups.len())?;
    if cfg.k == 0 || cfg.k > n {
        return Err(Error::InvalidDimension(format!(
            "subspace dimension {} must lie in 1..={n}",
            cfg.k
        )));
    }
    if samples.len() < cfg.k {
        return Err(Error::InvalidInput(format!(
            "need at least {} samples for a rank-{} basis, got {}",
            cfg.k,
            cfg.k,
            samples.len()
        )));
    }
    for (i, x) in samples.iter().enumerate() {
        check_len(n, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("sample {i} has a non-finite entry")));
        }
    }

    let mut p = init_subspace(n, cfg.k, cfg.init, cfg.seed)?;
    let x = DMatrix::from_fn(n, samples.len(), |r, c| samples[c][r]);
    let mut corpus = Corpus {
        n,
        s: DMatrix::zeros(n, samples.len()),
        alpha: DMatrix::zeros(cfg.k, samples.len()),
        recon: DMatrix::zeros(n, samples.len()),
        x,
        dop,
        groups,
        hp: cfg.hp,
    };
    let smoothing = SmoothingSystem::new(dop, cfg.hp.lambda1)?;
    let mut solver = AlphaSolver::new(&p, dop, cfg.hp.lambda1)?;
    let mut report = TrainReport::default();
    let mut current = corpus.objective();

    for iter in 0..cfg.outer_iters {
        let start = current;
        corpus.alpha_sweep(&p, &solver);
        let after_alpha = corpus.objective();
        corpus.s_sweep();
        let after_s = corpus.objective();
        p = corpus.basis_sweep(&p, &smoothing)?;
        solver = AlphaSolver::new(&p, dop, cfg.hp.lambda1)?;
        let after_basis = corpus.objective();

        report.sweeps.push(SweepTrace {
            start,
            after_alpha,
            after_s,
            after_basis,
        });
        report.objective_per_iter.push(after_basis);
        report
            .orthonormality_residual_per_iter
            .push(p.orthonormality_residual());
        report.elapsed_per_iter.push(started.elapsed().as_secs_f64());
        progress(iter, &report);

        let previous = current;
        current = after_basis;
        if converged(previous, current, cfg.hp.rel_tol) {
            break;
        }
    }
    report.wall_time = started.elapsed().as_secs_f64();
    Ok((p, report))
}

/// Leading `k` left singular vectors of the uncentered sample matrix.
pub fn pca_subspace(samples: &[DVector<f64>], k: usize) -> Result<BasisMatrix> {
    let n = samples.first().map_or(0, |x| x.len());
    if k == 0 || k > n {
        return Err(Error::InvalidDimension(format!("cannot take {k} components in dimension {n}")));
    }
    let mut scatter = DMatrix::zeros(n, n);
    for x in samples {
        check_len(n, x.len())?;
        scatter.ger(1.0, x, x, 1.0);
    }
    let eig = scatter.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut m = DMatrix::zeros(n, k);
    for (j, &idx) in order.iter().take(k).enumerate() {
        m.set_column(j, &eig.eigenvectors.column(idx));
    }
    gram_schmidt(&m)
}

/// `‖(I − PPᵗ)B‖_F / ‖B‖_F` with the columns of `B` given by `clean`.
pub fn subspace_recovery_error(p: &BasisMatrix, clean: &[DVector<f64>]) -> f64 {
    let mut resid = 0.0;
    let mut total = 0.0;
    for b in clean {
        let proj = p.matrix() * p.matrix().tr_mul(b);
        resid += (b - proj).norm_squared();
        total += b.norm_squared();
    }
    if total == 0.0 {
        0.0
    } else {
        (resid / total).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patching::column_groups;
    use rand::Rng;

    #[test]
    fn zigzag_starts_like_jpeg() {
        let z = zigzag_order(8);
        assert_eq!(&z[..6], &[(0, 0), (0, 1), (1, 0), (2, 0), (1, 1), (0, 2)]);
        assert_eq!(z.len(), 64);
        assert_eq!(*z.last().unwrap(), (7, 7));
        let mut sorted = z.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 64);
    }

    #[test]
    fn dct_init_starts_with_constant_atom() {
        let q = init_subspace(64, 10, Init::Dct, 0).unwrap();
        for v in q.column(0).iter() {
            assert!((v - 1.0 / 8.0).abs() < 1e-14);
        }
        assert!(q.orthonormality_residual() <= 1e-10);
        let full = init_subspace(16, 16, Init::Dct, 0).unwrap();
        assert!(full.orthonormality_residual() <= 1e-10);
    }

    #[test]
    fn random_init_is_deterministic() {
        let a = init_subspace(4, 2, Init::Random, 7).unwrap();
        let b = init_subspace(4, 2, Init::Random, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.orthonormality_residual() <= 1e-10);
        assert_ne!(a, init_subspace(4, 2, Init::Random, 8).unwrap());
    }

    #[test]
    fn init_rejects_bad_shapes() {
        assert!(init_subspace(4, 5, Init::Dct, 0).is_err());
        assert!(init_subspace(10, 2, Init::Dct, 0).is_err());
        assert!(init_subspace(4, 0, Init::Random, 0).is_err());
    }

    #[test]
    fn column_fixed_point_single_sample() {
        let p = BasisMatrix::from_orthonormal(DMatrix::from_column_slice(4, 1, &[0.5; 4]), 1e-15)
            .unwrap();
        let dop = DerivativeOperator::square(2).unwrap();
        let c = 1.7;
        let x = p.reconstruct(&DVector::from_element(1, c));
        let col = update_column(
            0,
            &p,
            &[x],
            &[DVector::from_element(1, c)],
            &[DVector::zeros(4)],
            &dop,
            0.0,
        )
        .unwrap();
        assert!((col - p.column(0)).abs().max() < 1e-15);
    }

    #[test]
    fn column_without_smoothing_is_rank_one_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (n, k, m) = (9, 3, 5);
        let p = gram_schmidt(&DMatrix::from_fn(n, k, |_, _| rng.gen_range(-1.0..1.0))).unwrap();
        let dop = DerivativeOperator::square(3).unwrap();
        let xs: Vec<DVector<f64>> = (0..m).map(|_| DVector::from_fn(n, |_, _| rng.gen_range(0.0..1.0))).collect();
        let ss: Vec<DVector<f64>> = (0..m).map(|_| DVector::from_fn(n, |_, _| rng.gen_range(0.0..0.1))).collect();
        let als: Vec<DVector<f64>> = (0..m).map(|_| DVector::from_fn(k, |_, _| rng.gen_range(-1.0..1.0))).collect();
        for j in 0..k {
            let got = update_column(j, &p, &xs, &als, &ss, &dop, 0.0).unwrap();
            let mut num = DVector::zeros(n);
            let mut den = 0.0;
            for i in 0..m {
                let mut eta = &xs[i] - &ss[i];
                for kk in (0..k).filter(|&kk| kk != j) {
                    eta -= p.column(kk) * als[i][kk];
                }
                num += eta * als[i][j];
                den += als[i][j] * als[i][j];
            }
            assert!((got - num / den).abs().max() < 1e-12);
        }
    }

    #[test]
    fn dead_atom_is_kept() {
        let p = BasisMatrix::from_orthonormal(DMatrix::identity(4, 2), 0.0).unwrap();
        let dop = DerivativeOperator::square(2).unwrap();
        let x = DVector::from_element(4, 0.3);
        let alpha = DVector::from_vec(vec![1.0, 0.0]);
        let col = update_column(1, &p, &[x], &[alpha], &[DVector::zeros(4)], &dop, 0.5).unwrap();
        assert_eq!(col, p.column(1).into_owned());
        assert!(update_column(2, &p, &[], &[], &[], &dop, 0.5).is_err());
    }

    fn exact_plane_corpus(rng: &mut ChaCha8Rng, count: usize) -> (BasisMatrix, Vec<DVector<f64>>) {
        let size = 4;
        let n = size * size;
        let plane = gram_schmidt(&DMatrix::from_fn(n, 2, |i, j| {
            if j == 0 { 1.0 } else { (i / size) as f64 + 0.5 * (i % size) as f64 }
        }))
        .unwrap();
        let xs = (0..count)
            .map(|_| plane.reconstruct(&DVector::from_vec(vec![rng.gen_range(1.0..2.0), rng.gen_range(-0.3..0.3)])))
            .collect();
        (plane, xs)
    }

    #[test]
    fn recovers_exact_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (_, xs) = exact_plane_corpus(&mut rng, 30);
        let dop = DerivativeOperator::square(4).unwrap();
        let groups = column_groups(4);
        let cfg = TrainConfig {
            k: 2,
            hp: HyperParams {
                lambda1: 0.0,
                lambda2: 10.0,
                lambda3: 10.0,
                rel_tol: 1e-14,
                ..HyperParams::default()
            },
            outer_iters: 200,
            seed: 0,
            init: Init::Random,
        };
        let (p, report) = train(&xs, &cfg, &dop, &groups).unwrap();
        for x in &xs {
            let resid = x - p.matrix() * p.matrix().tr_mul(x);
            assert!(resid.norm() <= 1e-6, "residual {}", resid.norm());
        }
        assert!(report.orthonormality_residual_per_iter.iter().all(|&r| r <= 1e-8));
    }

    #[test]
    fn complete_basis_reaches_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let xs: Vec<DVector<f64>> = (0..20).map(|_| DVector::from_fn(9, |_, _| rng.gen_range(0.0..1.0))).collect();
        let dop = DerivativeOperator::square(3).unwrap();
        let groups = column_groups(3);
        let cfg = TrainConfig {
            k: 9,
            hp: HyperParams {
                lambda1: 0.0,
                lambda2: 0.0,
                lambda3: 0.0,
                ..HyperParams::default()
            },
            outer_iters: 3,
            ..TrainConfig::default()
        };
        let (_, report) = train(&xs, &cfg, &dop, &groups).unwrap();
        assert!(*report.objective_per_iter.last().unwrap() < 1e-20);
    }

    #[test]
    fn train_rejects_bad_input() {
        let dop = DerivativeOperator::square(2).unwrap();
        let groups = column_groups(2);
        let cfg = TrainConfig { k: 3, ..TrainConfig::default() };
        let xs = vec![DVector::zeros(4); 2];
        assert!(matches!(train(&xs, &cfg, &dop, &groups), Err(Error::InvalidInput(_))));
        let mut bad = vec![DVector::zeros(4); 4];
        bad[2][0] = f64::INFINITY;
        assert!(matches!(train(&bad, &cfg, &dop, &groups), Err(Error::InvalidInput(_))));
        let cfg = TrainConfig { k: 5, ..TrainConfig::default() };
        assert!(train(&vec![DVector::zeros(4); 8], &cfg, &dop, &groups).is_err());
    }

    #[test]
    fn pca_of_exact_plane_has_zero_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (plane, xs) = exact_plane_corpus(&mut rng, 10);
        let p = pca_subspace(&xs, 2).unwrap();
        assert!(subspace_recovery_error(&p, &xs) < 1e-7);
        assert!(subspace_recovery_error(&plane, &xs) < 1e-12);
    }
}
