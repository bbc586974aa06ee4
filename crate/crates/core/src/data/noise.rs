//! Additive white Gaussian corruption on the 0–255 pixel scale.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::image::GrayImage;
use crate::error::{Error, Result};

/// Add i.i.d. N(0, sigma²) to every pixel, row-major order, without
/// clamping: training sees the unclipped noise field. Deterministic per seed.
pub fn add_gaussian_noise(img: &GrayImage, sigma: f64, seed: u64) -> Result<GrayImage> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidConfig(format!("noise sigma must be finite and >= 0, got {sigma}")));
    }
    let mut out = img.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::InvalidConfig(format!("noise sigma {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in out.pixels_mut() {
        *p += normal.sample(&mut rng);
    }
    Ok(out)
}
