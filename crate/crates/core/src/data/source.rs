//! Training patch sources: corruption is applied once per image at
//! preparation time, then batches are drawn deterministically by
//! `(seed, iter)` with position and flip randomness.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::image::{load_image, GrayImage};
use crate::data::noise::add_gaussian_noise;
use crate::data::patch::extract_patches;
use crate::data::resize::make_sr_pair;
use crate::error::{Error, Result};
use crate::layers::mix_seed;
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

/// How clean images are corrupted into network inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum CorruptionSpec {
    /// Additive white Gaussian noise, sigma on the 0–255 scale.
    GaussianNoise { sigma: f64 },
    /// Bicubic down/up round trip at one scale factor.
    Sr { factor: usize },
    /// Scale factor drawn per patch from the set (blind multi-scale model).
    SrBlind { factors: Vec<usize> },
}

impl CorruptionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            CorruptionSpec::GaussianNoise { sigma } => {
                if !(*sigma > 0.0) || !sigma.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "noise sigma must be positive and finite, got {sigma}"
                    )));
                }
            }
            CorruptionSpec::Sr { factor } => {
                if !(2..=4).contains(factor) {
                    return Err(Error::InvalidConfig(format!(
                        "scale factor must be 2, 3, or 4, got {factor}"
                    )));
                }
            }
            CorruptionSpec::SrBlind { factors } => {
                if factors.is_empty() {
                    return Err(Error::InvalidConfig("blind scale-factor set is empty".into()));
                }
                for f in factors {
                    if !(2..=4).contains(f) {
                        return Err(Error::InvalidConfig(format!(
                            "scale factor must be 2, 3, or 4, got {f}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

#[derive(Debug, Clone)]
struct PreparedImage {
    clean: GrayImage,
    /// One corrupted rendition per variant; a single entry except in blind
    /// SR mode, where each scale factor contributes one.
    corrupted: Vec<GrayImage>,
    positions: Vec<(usize, usize)>,
}

/// Immutable after preparation; batch sampling is a pure function of
/// `(self, seed, iter)` and safe to share across threads.
#[derive(Debug, Clone)]
pub struct PatchSource {
    images: Vec<PreparedImage>,
    patch_size: usize,
    /// cumulative[i] = number of patches in images[..i]
    cumulative: Vec<usize>,
    total: usize,
}

impl PatchSource {
    /// Corrupt every image and enumerate its patch grid. Noise seeds are
    /// derived per image from `seed`, so the whole pipeline replays from
    /// one run seed.
    pub fn prepare(
        images: &[GrayImage],
        spec: &CorruptionSpec,
        patch_size: usize,
        stride: usize,
        seed: u64,
    ) -> Result<PatchSource> {
        spec.validate()?;
        if images.is_empty() {
            return Err(Error::EmptyDataset("no images to prepare".into()));
        }
        let mut prepared = Vec::with_capacity(images.len());
        let mut cumulative = Vec::with_capacity(images.len());
        let mut total = 0usize;
        for (i, img) in images.iter().enumerate() {
            let (clean, corrupted) = match spec {
                CorruptionSpec::GaussianNoise { sigma } => {
                    let noisy = add_gaussian_noise(img, *sigma, mix_seed(seed, i as u64))?;
                    (img.clone(), vec![noisy])
                }
                CorruptionSpec::Sr { factor } => {
                    let (corrupted, clean) = make_sr_pair(img, *factor)?;
                    (clean, vec![corrupted])
                }
                CorruptionSpec::SrBlind { factors } => {
                    // Crop once to a common multiple so every factor's
                    // rendition shares the clean image's dimensions.
                    let m = factors.iter().copied().fold(1, lcm);
                    let h = img.height() / m * m;
                    let w = img.width() / m * m;
                    if h == 0 || w == 0 {
                        return Err(Error::ImageTooSmall { h: img.height(), w: img.width(), need: m });
                    }
                    let clean = img.crop(0, 0, h, w)?;
                    let corrupted = factors
                        .iter()
                        .map(|f| make_sr_pair(&clean, *f).map(|(c, _)| c))
                        .collect::<Result<Vec<_>>>()?;
                    (clean, corrupted)
                }
            };
            let positions = extract_patches(&clean, patch_size, stride)?;
            cumulative.push(total);
            total += positions.len();
            prepared.push(PreparedImage { clean, corrupted, positions });
        }
        Ok(PatchSource { images: prepared, patch_size, cumulative, total })
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn total_patches(&self) -> usize {
        self.total
    }

    pub fn image_count(&self) -> usize {
        self.images.len()
    }

    /// Draw `batch_size` patch pairs: position uniform over the pooled patch
    /// grid of all images, variant uniform (blind SR), horizontal flip with
    /// probability 1/2. Values are divided by 255. Deterministic in
    /// `(seed, iter)`: the RNG stream index is the iteration.
    pub fn sample_batch<S: Scalar>(
        &self,
        batch_size: usize,
        seed: u64,
        iter: u64,
    ) -> Result<(Tensor4<S>, Tensor4<S>)> {
        if batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        let k = self.patch_size;
        let mut input = Tensor4::zeros(batch_size, 1, k, k)?;
        let mut target = Tensor4::zeros(batch_size, 1, k, k)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(iter);
        for slot in 0..batch_size {
            let flat = rng.gen_range(0..self.total);
            let img_idx = self.cumulative.partition_point(|&c| c <= flat) - 1;
            let img = &self.images[img_idx];
            let (top, left) = img.positions[flat - self.cumulative[img_idx]];
            let variant = if img.corrupted.len() > 1 {
                rng.gen_range(0..img.corrupted.len())
            } else {
                0
            };
            let flip = rng.gen_bool(0.5);
            let src_in = &img.corrupted[variant];
            let src_tg = &img.clean;
            let in_slot = input.sample_mut(slot);
            let tg_slot = target.sample_mut(slot);
            for y in 0..k {
                for x in 0..k {
                    let sx = left + if flip { k - 1 - x } else { x };
                    in_slot[y * k + x] = S::from_f64(src_in.at(top + y, sx) / 255.0);
                    tg_slot[y * k + x] = S::from_f64(src_tg.at(top + y, sx) / 255.0);
                }
            }
        }
        Ok((input, target))
    }
}

/// Read a dataset manifest: one image path per line, `#` comments and blank
/// lines ignored, paths relative to the manifest's directory. Returns
/// `(display name, image)` pairs in file order.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<(String, GrayImage)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let img_path = base.join(line);
        let name = img_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| line.to_string());
        out.push((name, load_image(&img_path)?));
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset(format!("manifest {} lists no images", path.display())));
    }
    Ok(out)
}
