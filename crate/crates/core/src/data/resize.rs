//! Separable bicubic resampling (Catmull-Rom, a = −0.5) and the LR/HR pair
//! synthesis used for super-resolution training.
//!
//! Coordinate mapping is center-aligned: `src = (dst + 0.5)·scale − 0.5`,
//! with source indices clamped at the edges. Downscaling applies the same
//! 4-tap kernel (no extra antialias prefilter).

use crate::data::image::GrayImage;
use crate::error::{Error, Result};

/// Catmull-Rom cubic kernel (a = −0.5); support (−2, 2), interpolating,
/// weights for the 4 taps around any sample point sum to 1.
fn cubic(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        (1.5 * t - 2.5) * t * t + 1.0
    } else if t < 2.0 {
        ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0
    } else {
        0.0
    }
}

/// Per-destination-index taps: clamped source indices and kernel weights.
fn axis_taps(in_len: usize, out_len: usize) -> Vec<([usize; 4], [f64; 4])> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|dst| {
            let src = (dst as f64 + 0.5) * scale - 0.5;
            let base = src.floor();
            let f = src - base;
            let base = base as isize;
            let mut idx = [0usize; 4];
            let mut w = [0f64; 4];
            for (j, (slot_i, slot_w)) in idx.iter_mut().zip(&mut w).enumerate() {
                let i = base - 1 + j as isize;
                *slot_i = i.clamp(0, in_len as isize - 1) as usize;
                *slot_w = cubic(f + 1.0 - j as f64);
            }
            (idx, w)
        })
        .collect()
}

/// Resize to `out_h × out_w`: horizontal pass then vertical pass.
pub fn bicubic_resize(img: &GrayImage, out_h: usize, out_w: usize) -> Result<GrayImage> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::EmptyDim(1, 1, out_h, out_w));
    }
    let (h, w) = (img.height(), img.width());
    // Horizontal: (h, w) -> (h, out_w)
    let taps = axis_taps(w, out_w);
    let mut mid = GrayImage::new(h, out_w)?;
    for y in 0..h {
        let row = img.row(y);
        for (x, (idx, wt)) in taps.iter().enumerate() {
            let v = wt[0] * row[idx[0]] + wt[1] * row[idx[1]] + wt[2] * row[idx[2]] + wt[3] * row[idx[3]];
            mid.set(y, x, v);
        }
    }
    // Vertical: (h, out_w) -> (out_h, out_w)
    let taps = axis_taps(h, out_h);
    let mut out = GrayImage::new(out_h, out_w)?;
    for (y, (idx, wt)) in taps.iter().enumerate() {
        let rows = [mid.row(idx[0]), mid.row(idx[1]), mid.row(idx[2]), mid.row(idx[3])];
        for x in 0..out_w {
            let v = wt[0] * rows[0][x] + wt[1] * rows[1][x] + wt[2] * rows[2][x] + wt[3] * rows[3][x];
            out.set(y, x, v);
        }
    }
    Ok(out)
}

/// Build one SR training pair from a clean image: crop dims down to
/// multiples of `factor`, downscale bicubically by `factor`, then upscale
/// back so the corrupted input matches the clean target's size.
/// Returns `(corrupted, clean)`.
pub fn make_sr_pair(img: &GrayImage, factor: usize) -> Result<(GrayImage, GrayImage)> {
    if !(2..=4).contains(&factor) {
        return Err(Error::InvalidConfig(format!("scale factor must be 2, 3, or 4, got {factor}")));
    }
    let h = img.height() / factor * factor;
    let w = img.width() / factor * factor;
    if h == 0 || w == 0 {
        return Err(Error::ImageTooSmall { h: img.height(), w: img.width(), need: factor });
    }
    let clean = img.crop(0, 0, h, w)?;
    let low = bicubic_resize(&clean, h / factor, w / factor)?;
    let corrupted = bicubic_resize(&low, h, w)?;
    Ok((corrupted, clean))
}
