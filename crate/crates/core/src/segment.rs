//! Foreground segmentation of whole images with a learned basis.

use rayon::prelude::*;

use crate::decomposition::{mask_from_s, Decomposer, HyperParams};
use crate::error::{Error, Result};
use crate::operators::{BasisMatrix, DerivativeOperator};
use crate::patching::{assemble_mask, column_groups, tile_blocks, BinaryImage, GrayImage};

/// Tiles `img` at `patch_size`, decomposes every tile against `basis`, and
/// marks pixels whose outlier component exceeds `tau`.
pub fn segment_image(
    basis: &BasisMatrix,
    patch_size: usize,
    img: &GrayImage,
    hp: &HyperParams,
    tau: f64,
) -> Result<BinaryImage> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be nonnegative, got {tau}")));
    }
    let dop = DerivativeOperator::square(patch_size)?;
    let groups = column_groups(patch_size);
    let decomposer = Decomposer::new(basis, &dop, &groups, *hp)?;
    let (tiles, layout) = tile_blocks(img, patch_size)?;
    let masks = tiles
        .par_iter()
        .map(|t| decomposer.decompose(t).map(|d| mask_from_s(d.s.as_slice(), tau)))
        .collect::<Result<Vec<_>>>()?;
    assemble_mask(&masks, &layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::{init_subspace, Init};

    #[test]
    fn constant_image_has_empty_mask() {
        let basis = init_subspace(64, 6, Init::Dct, 0).unwrap();
        let img = GrayImage::new(20, 13, vec![0.6; 260]).unwrap();
        let mask = segment_image(&basis, 8, &img, &HyperParams::default(), 0.1).unwrap();
        assert_eq!((mask.height(), mask.width()), (20, 13));
        assert_eq!(mask.count_ones(), 0);
    }

    #[test]
    fn bright_bar_is_found() {
        let basis = init_subspace(64, 6, Init::Dct, 0).unwrap();
        let img = GrayImage::from_fn(16, 16, |r, c| if c == 5 && (3..12).contains(&r) { 0.9 } else { 0.3 })
            .unwrap();
        let mask = segment_image(&basis, 8, &img, &HyperParams::default(), 0.1).unwrap();
        let expect = BinaryImage::from_gray(&img, 0.5);
        assert_eq!(mask, expect);
    }

    #[test]
    fn huge_threshold_gives_empty_mask() {
        let basis = init_subspace(64, 6, Init::Dct, 0).unwrap();
        let img = GrayImage::from_fn(16, 16, |r, c| if c == 5 && r > 4 { 1.0 } else { 0.0 }).unwrap();
        let mask = segment_image(&basis, 8, &img, &HyperParams::default(), 1.0).unwrap();
        assert_eq!(mask.count_ones(), 0);
        assert!(segment_image(&basis, 8, &img, &HyperParams::default(), -1.0).is_err());
    }
}
