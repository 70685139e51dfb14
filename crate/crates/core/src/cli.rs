//! Command-line front end: `train`, `segment`, `eval`, `synth`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::decomposition::{HyperParams, DEFAULT_TAU};
use crate::error::Error;
use crate::imageio::{read_gray, read_mask, write_gray, write_mask, ImageFormat};
use crate::learner::{train_with_progress, Init, TrainConfig};
use crate::metrics::confusion;
use crate::model::Model;
use crate::operators::DerivativeOperator;
use crate::patching::{column_groups, extract_patches, BinaryImage, GrayImage};
use crate::segment::segment_image;
use crate::synth::{gen_corpus, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "rssl", version, about = "Robust subspace learning and foreground segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a basis from the images in a directory.
    Train(TrainArgs),
    /// Segment the foreground of one image.
    Segment(SegmentArgs),
    /// Score a predicted mask against ground truth.
    Eval(EvalArgs),
    /// Write a synthetic corpus of sample/mask PGM pairs.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Dct,
    Random,
}

impl From<InitArg> for Init {
    fn from(v: InitArg) -> Self {
        match v {
            InitArg::Dct => Init::Dct,
            InitArg::Random => Init::Random,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub input_dir: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub patch_size: usize,
    #[arg(long, default_value_t = 5)]
    pub stride: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Smoothness weight.
    #[arg(long, default_value_t = 0.5)]
    pub lambda1: f64,
    /// Sparsity weight, in 8-bit gray levels.
    #[arg(long, default_value_t = 1.0)]
    pub lambda2: f64,
    /// Column-group weight, in 8-bit gray levels.
    #[arg(long, default_value_t = 2.0)]
    pub lambda3: f64,
    #[arg(long, default_value_t = 50)]
    pub iters: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Dct)]
    pub init: InitArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "model.rssl")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    pub model: PathBuf,
    pub image: PathBuf,
    /// Number of leading basis atoms to use.
    #[arg(long, default_value_t = 20)]
    pub atoms: usize,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value = "mask.pgm")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub pred_mask: PathBuf,
    pub gt_mask: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 32)]
    pub patch_size: usize,
    #[arg(long, default_value_t = 6)]
    pub bg_rank: usize,
    #[arg(long, default_value_t = 0.15)]
    pub outlier_prob: f64,
    #[arg(long, default_value_t = 0.4)]
    pub outlier_mag: f64,
    #[arg(long, default_value_t = 0.02)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(Error::Io(e))
    }
}

pub fn run(cli: Cli, out: &mut impl Write) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => cmd_train(&a, out),
        Command::Segment(a) => cmd_segment(&a),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.is_file() && ImageFormat::from_path(p).is_some());
    files.sort();
    Ok(files)
}

pub fn cmd_train(a: &TrainArgs, out: &mut impl Write) -> Result<(), CliError> {
    if a.patch_size == 0 || a.stride == 0 {
        return Err(CliError::Usage("--patch-size and --stride must be positive".into()));
    }
    let n = a.patch_size * a.patch_size;
    if a.dim == 0 || a.dim > n {
        return Err(CliError::Usage(format!(
            "--dim {} must lie in 1..={n} for {}x{} patches",
            a.dim, a.patch_size, a.patch_size
        )));
    }
    if a.iters == 0 {
        return Err(CliError::Usage("--iters must be at least 1".into()));
    }
    let mut samples = Vec::new();
    let files = image_files(&a.input_dir)?;
    for path in &files {
        let img = read_gray(path)?;
        if img.height().min(img.width()) >= a.patch_size {
            samples.extend(extract_patches(&img, a.patch_size, a.stride)?);
        }
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no {}x{} patches found in {} ({} images)",
            a.patch_size,
            a.patch_size,
            a.input_dir.display(),
            files.len()
        ))
        .into());
    }
    let cfg = TrainConfig {
        k: a.dim,
        hp: HyperParams {
            rel_tol: TrainConfig::default().hp.rel_tol,
            ..HyperParams::from_gray_levels(a.lambda1, a.lambda2, a.lambda3)
        },
        outer_iters: a.iters,
        seed: a.seed,
        init: a.init.into(),
    };
    let dop = DerivativeOperator::square(a.patch_size)?;
    let groups = column_groups(a.patch_size);
    writeln!(out, "iter,objective,orthonormality_residual,seconds")?;
    let mut write_err = None;
    let (basis, report) = train_with_progress(&samples, &cfg, &dop, &groups, |it, r| {
        let line = writeln!(
            out,
            "{},{:.10e},{:.3e},{:.3}",
            it + 1,
            r.objective_per_iter[it],
            r.orthonormality_residual_per_iter[it],
            r.elapsed_per_iter[it]
        );
        if let Err(e) = line {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    writeln!(out, "# patches={} wall_time={:.3}", samples.len(), report.wall_time)?;
    Model::new(a.patch_size, basis)?.save(&a.out)?;
    Ok(())
}

pub fn cmd_segment(a: &SegmentArgs) -> Result<(), CliError> {
    let model = Model::load(&a.model)?;
    if a.atoms == 0 || a.atoms > model.k() {
        return Err(CliError::Usage(format!(
            "--atoms {} must lie in 1..={} for this model",
            a.atoms,
            model.k()
        )));
    }
    if !(a.tau >= 0.0) {
        return Err(CliError::Usage(format!("--tau must be nonnegative, got {}", a.tau)));
    }
    let basis = model.basis().truncate(a.atoms)?;
    let img = read_gray(&a.image)?;
    let mask = segment_image(&basis, model.patch_size(), &img, &HyperParams::default(), a.tau)?;
    write_mask(&a.out, &mask)?;
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs, out: &mut impl Write) -> Result<(), CliError> {
    let pred = read_mask(&a.pred_mask)?;
    let gt = read_mask(&a.gt_mask)?;
    if (pred.height(), pred.width()) != (gt.height(), gt.width()) {
        return Err(CliError::Usage(format!(
            "mask sizes differ: {}x{} vs {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    let m = confusion(&pred, &gt)?;
    writeln!(out, "{}", m.csv_line())?;
    Ok(())
}

pub fn cmd_synth(a: &SynthArgs) -> Result<(), CliError> {
    let spec = SynthSpec {
        patch_size: a.patch_size,
        bg_rank: a.bg_rank,
        outlier_prob: a.outlier_prob,
        outlier_mag: a.outlier_mag,
        noise_sigma: a.noise_sigma,
        seed: a.seed,
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    fs::create_dir_all(&a.out_dir)?;
    let size = a.patch_size;
    for (i, s) in gen_corpus(&spec, a.count)?.into_iter().enumerate() {
        let img = GrayImage::new(size, size, s.x.as_slice().to_vec())?;
        write_gray(a.out_dir.join(format!("sample_{i:05}.pgm")), &img)?;
        let mask = BinaryImage::new(size, size, s.gt_mask)?;
        write_mask(a.out_dir.join(format!("mask_{i:05}.pgm")), &mask)?;
    }
    Ok(())
}
