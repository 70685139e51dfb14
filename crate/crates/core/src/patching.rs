//! Images to patch vectors and back.
//!
//! All vectorization is row-major: pixel `(r, c)` of a `size × size` patch
//! is entry `r·size + c`.

use nalgebra::DVector;

use crate::decomposition::GroupStructure;
use crate::error::{Error, Result};

/// Grayscale image with row-major intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidInput(format!(
                "{height}x{width} image needs {} pixels, got {}",
                height * width,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput(format!(
                "pixel {i} has intensity {} outside [0, 1]",
                data[i]
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..height)
            .flat_map(|r| (0..width).map(move |c| (r, c)))
            .map(|(r, c)| f(r, c))
            .collect();
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }
}

/// Row-major binary image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl BinaryImage {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidInput(format!(
                "{height}x{width} mask needs {} pixels, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.width + c]
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Pixels with intensity above `threshold`.
    pub fn from_gray(img: &GrayImage, threshold: f64) -> Self {
        Self {
            height: img.height,
            width: img.width,
            data: img.data.iter().map(|&v| v > threshold).collect(),
        }
    }
}

/// Geometry for inverting [`tile_blocks`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileLayout {
    pub patch_size: usize,
    pub rows: usize,
    pub cols: usize,
    pub pad_bottom: usize,
    pub pad_right: usize,
}

impl TileLayout {
    pub fn tile_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn original_height(&self) -> usize {
        self.rows * self.patch_size - self.pad_bottom
    }

    pub fn original_width(&self) -> usize {
        self.cols * self.patch_size - self.pad_right
    }
}

fn patch_at(img: &GrayImage, top: usize, left: usize, size: usize) -> DVector<f64> {
    let mut v = Vec::with_capacity(size * size);
    for r in top..top + size {
        let row = r * img.width;
        v.extend_from_slice(&img.data[row + left..row + left + size]);
    }
    DVector::from_vec(v)
}

/// Number of patches [`extract_patches`] returns along an axis of length `len`.
pub fn patch_count_1d(len: usize, size: usize, stride: usize) -> usize {
    if size == 0 || stride == 0 || size > len {
        0
    } else {
        (len - size) / stride + 1
    }
}

/// Overlapping `size × size` patches at the given stride, in top-left scan order.
pub fn extract_patches(img: &GrayImage, size: usize, stride: usize) -> Result<Vec<DVector<f64>>> {
    if size == 0 || stride == 0 {
        return Err(Error::InvalidInput(format!(
            "patch size and stride must be positive, got {size} and {stride}"
        )));
    }
    if size > img.height.min(img.width) {
        return Err(Error::InvalidInput(format!(
            "patch size {size} exceeds {}x{} image",
            img.height, img.width
        )));
    }
    let rows = patch_count_1d(img.height, size, stride);
    let cols = patch_count_1d(img.width, size, stride);
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            out.push(patch_at(img, i * stride, j * stride, size));
        }
    }
    Ok(out)
}

/// Non-overlapping tiles after replicating the bottom row and right column
/// out to a multiple of `size`. Tiles come in row-major tile order.
pub fn tile_blocks(img: &GrayImage, size: usize) -> Result<(Vec<DVector<f64>>, TileLayout)> {
    if size == 0 {
        return Err(Error::InvalidInput("tile size must be positive".into()));
    }
    if img.height == 0 || img.width == 0 {
        return Err(Error::InvalidInput("cannot tile an empty image".into()));
    }
    let rows = img.height.div_ceil(size);
    let cols = img.width.div_ceil(size);
    let layout = TileLayout {
        patch_size: size,
        rows,
        cols,
        pad_bottom: rows * size - img.height,
        pad_right: cols * size - img.width,
    };
    let mut tiles = Vec::with_capacity(rows * cols);
    for ti in 0..rows {
        for tj in 0..cols {
            let mut v = Vec::with_capacity(size * size);
            for r in 0..size {
                let src_r = (ti * size + r).min(img.height - 1);
                for c in 0..size {
                    let src_c = (tj * size + c).min(img.width - 1);
                    v.push(img.get(src_r, src_c));
                }
            }
            tiles.push(DVector::from_vec(v));
        }
    }
    Ok((tiles, layout))
}

/// Stitches per-tile masks back together and crops the padding.
pub fn assemble_mask(tiles: &[Vec<bool>], layout: &TileLayout) -> Result<BinaryImage> {
    if tiles.len() != layout.tile_count() {
        return Err(Error::InvalidInput(format!(
            "layout has {} tiles, got {}",
            layout.tile_count(),
            tiles.len()
        )));
    }
    let size = layout.patch_size;
    if let Some(bad) = tiles.iter().position(|t| t.len() != size * size) {
        return Err(Error::InvalidInput(format!(
            "tile {bad} has {} pixels, expected {}",
            tiles[bad].len(),
            size * size
        )));
    }
    let (h, w) = (layout.original_height(), layout.original_width());
    let mut data = vec![false; h * w];
    for r in 0..h {
        for c in 0..w {
            let tile = &tiles[(r / size) * layout.cols + c / size];
            data[r * w + c] = tile[(r % size) * size + c % size];
        }
    }
    BinaryImage::new(h, w, data)
}

/// One group per patch column: `g_m = {m, m + size, m + 2·size, …}`.
pub fn column_groups(size: usize) -> GroupStructure {
    let groups = (0..size)
        .map(|m| (0..size).map(|r| r * size + m).collect())
        .collect();
    GroupStructure::new(size * size, groups).expect("columns partition a square patch")
}
