//! Plumbing shared by the commands: manifest loading, per-task image
//! corruption, validation-pair construction, and timed restoration.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rcnet_core::data::{add_gaussian_noise, load_manifest, make_sr_pair, GrayImage};
use rcnet_core::layers::mix_seed;
use rcnet_core::model::Network;
use rcnet_core::{Scalar, Tensor4};

use crate::config::{RunConfig, Task};
use crate::error::{Error, Result};

/// Salt separating validation-image noise from training-image noise.
pub const VAL_SEED_SALT: u64 = 0x76616c21; // "val!"

pub fn load_named_images(manifest: &str) -> Result<Vec<(String, GrayImage)>> {
    Ok(load_manifest(manifest)?)
}

pub fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Degrade one clean image the way the task's pipeline does, returning the
/// network input and the reference the result should be scored against.
/// For multi-scale configs the caller picks the factor.
pub fn corrupt_clean(
    clean: &GrayImage,
    cfg: &RunConfig,
    factor_override: Option<usize>,
    noise_seed: u64,
) -> Result<(GrayImage, GrayImage)> {
    match cfg.task {
        Task::Denoise => {
            let noisy = add_gaussian_noise(clean, cfg.sigma, noise_seed)?;
            Ok((noisy, clean.clone()))
        }
        Task::Sr => {
            let f = factor_override.unwrap_or(cfg.sr_factor);
            let (corrupted, reference) = make_sr_pair(clean, f)?;
            Ok((corrupted, reference))
        }
        Task::SrBlind => {
            let f = factor_override
                .or_else(|| cfg.sr_factors.first().copied())
                .ok_or_else(|| Error::Config("sr_factors is empty".into()))?;
            let (corrupted, reference) = make_sr_pair(clean, f)?;
            Ok((corrupted, reference))
        }
    }
}

/// Build the fixed validation pair from the first image of the validation
/// manifest: corrupted input and clean target as 1×1×H×W tensors.
pub fn make_val_pair<S: Scalar>(cfg: &RunConfig) -> Result<Option<(Tensor4<S>, Tensor4<S>)>> {
    let Some(manifest) = &cfg.val_manifest else {
        return Ok(None);
    };
    let images = load_named_images(manifest)?;
    let (_, clean) = &images[0];
    let (input, reference) = corrupt_clean(clean, cfg, None, mix_seed(cfg.seed, VAL_SEED_SALT))?;
    Ok(Some((input.to_tensor()?, reference.to_tensor()?)))
}

/// Eval-mode forward pass on one whole image, with wall-clock timing.
/// The result is quantized — clamped to [0, 255] and rounded — because
/// that is what gets written to disk and measured.
pub fn restore_image<S: Scalar>(
    net: &Network<S>,
    input: &GrayImage,
) -> Result<(GrayImage, f64)> {
    let x = input.to_tensor::<S>()?;
    let t0 = Instant::now();
    let y = net.infer(&x)?;
    let runtime = t0.elapsed().as_secs_f64();
    let restored = GrayImage::from_tensor(&y)?.quantized();
    Ok((restored, runtime))
}

/// `dir/stem_suffix.ext`, preserving the input's extension (pgm/png).
pub fn output_path(dir: &Path, input: &Path, suffix: &str) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into());
    let ext = input
        .extension()
        .map(|s| s.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_else(|| "png".into());
    dir.join(format!("{stem}_{suffix}.{ext}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_paths_keep_stem_and_extension() {
        let p = output_path(Path::new("out"), Path::new("shots/img7.PNG"), "restored");
        assert_eq!(p, Path::new("out/img7_restored.png"));
        let p = output_path(Path::new("out"), Path::new("a.pgm"), "noisy");
        assert_eq!(p, Path::new("out/a_noisy.pgm"));
    }

    #[test]
    fn denoise_corruption_pairs_noisy_with_original() {
        let cfg = RunConfig::default();
        let clean = GrayImage::from_pixels(12, 12, vec![128.0; 144]).unwrap();
        let (input, reference) = corrupt_clean(&clean, &cfg, None, 3).unwrap();
        assert_eq!(reference.pixels(), clean.pixels());
        assert!(input.pixels().iter().any(|&p| (p - 128.0).abs() > 1.0));
    }

    #[test]
    fn sr_corruption_crops_reference_to_factor_multiple() {
        let mut cfg = RunConfig::default();
        cfg.task = Task::Sr;
        cfg.sr_factor = 3;
        let clean = GrayImage::from_pixels(13, 14, (0..13 * 14).map(|i| i as f64).collect())
            .unwrap();
        let (input, reference) = corrupt_clean(&clean, &cfg, None, 0).unwrap();
        assert_eq!((reference.height(), reference.width()), (12, 12));
        assert_eq!((input.height(), input.width()), (12, 12));
    }
}
