//! Patch-grid enumeration and horizontal-flip augmentation.

use crate::data::image::GrayImage;
use crate::error::{Error, Result};

/// Grid of fully-contained patch origins: rows `0, stride, 2·stride, …`,
/// columns likewise.
pub fn extract_patches(img: &GrayImage, size: usize, stride: usize) -> Result<Vec<(usize, usize)>> {
    if size == 0 || stride == 0 {
        return Err(Error::InvalidConfig(format!(
            "patch size and stride must be positive, got {size}/{stride}"
        )));
    }
    if img.height() < size || img.width() < size {
        return Err(Error::ImageTooSmall { h: img.height(), w: img.width(), need: size });
    }
    let rows = (img.height() - size) / stride + 1;
    let cols = (img.width() - size) / stride + 1;
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push((r * stride, c * stride));
        }
    }
    Ok(out)
}

/// Horizontal mirror when `flip`; identity otherwise. Applied to the
/// corrupted and clean members of a pair with the same flag.
pub fn augment(patch: &GrayImage, flip: bool) -> GrayImage {
    if !flip {
        return patch.clone();
    }
    let (h, w) = (patch.height(), patch.width());
    let mut out = patch.clone();
    for y in 0..h {
        for x in 0..w {
            out.set(y, x, patch.at(y, w - 1 - x));
        }
    }
    out
}
