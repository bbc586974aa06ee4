//! Single-image restoration commands: denoise and super-resolve a list of
//! images with a trained checkpoint, write the outputs, and report quality.
//!
//! Each command scores its outputs against a reference: the original clean
//! image when the command itself applied the corruption (`--sigma`,
//! `--corrupt`), otherwise the input file as given — in that case the
//! report measures how much the network changed the image, and an
//! untouched output scores an infinite PSNR.

use std::path::{Path, PathBuf};

use rcnet_core::data::{add_gaussian_noise, load_image, make_sr_pair, save_image, GrayImage};
use rcnet_core::layers::mix_seed;
use rcnet_core::metrics::{psnr, ssim, QualityReport, QualityRow};
use rcnet_core::model::Network;
use rcnet_core::{Precision, Scalar};

use crate::checkpoint::{self, RawCheckpoint};
use crate::commands::common::{ensure_out_dir, output_path, restore_image};
use crate::config::Task;
use crate::error::{Error, Result};

#[derive(Debug)]
pub struct RestoreOutcome {
    pub report: QualityReport,
    pub report_csv: PathBuf,
    pub outputs: Vec<PathBuf>,
}

pub fn cmd_denoise(
    ckpt_path: &Path,
    inputs: &[PathBuf],
    out_dir: &Path,
    sigma: Option<f64>,
    seed: Option<u64>,
) -> Result<RestoreOutcome> {
    let raw = checkpoint::load(ckpt_path)?;
    if raw.config.task != Task::Denoise {
        return Err(Error::Usage(format!(
            "checkpoint was trained for task '{}', not denoising",
            raw.config.task.as_str()
        )));
    }
    let seed = seed.unwrap_or(raw.config.seed);
    run_restore(&raw, ckpt_path, inputs, out_dir, &mut |input_path, idx| {
        let loaded = load_image(input_path)?;
        match sigma {
            // Corrupt-first mode: the file is clean ground truth.
            Some(s) => {
                let noisy = add_gaussian_noise(&loaded, s, mix_seed(seed, idx as u64))?;
                Ok((noisy, loaded))
            }
            // The file is already noisy; score against it.
            None => Ok((loaded.clone(), loaded)),
        }
    })
}

pub fn cmd_superres(
    ckpt_path: &Path,
    inputs: &[PathBuf],
    out_dir: &Path,
    factor: Option<usize>,
    corrupt: bool,
) -> Result<RestoreOutcome> {
    let raw = checkpoint::load(ckpt_path)?;
    let factor = match (factor, raw.config.task) {
        (Some(f), Task::Sr | Task::SrBlind) => f,
        (None, Task::Sr) => raw.config.sr_factor,
        (None, Task::SrBlind) => *raw.config.sr_factors.first().ok_or_else(|| {
            Error::Config("checkpoint's sr_factors list is empty".into())
        })?,
        (_, Task::Denoise) => {
            return Err(Error::Usage(
                "checkpoint was trained for task 'denoise', not super-resolution".into(),
            ))
        }
    };
    run_restore(&raw, ckpt_path, inputs, out_dir, &mut |input_path, _| {
        let loaded = load_image(input_path)?;
        if corrupt {
            // The file is clean ground truth: build its degraded rendition.
            let (corrupted, reference) = make_sr_pair(&loaded, factor)?;
            Ok((corrupted, reference))
        } else {
            // The file is already the interpolated low-resolution image.
            Ok((loaded.clone(), loaded))
        }
    })
}

/// Shared restoration loop: per input, derive (network input, reference),
/// run the network, save the output, and add a report row.
fn run_restore(
    raw: &RawCheckpoint,
    ckpt_path: &Path,
    inputs: &[PathBuf],
    out_dir: &Path,
    derive: &mut dyn FnMut(&Path, usize) -> Result<(GrayImage, GrayImage)>,
) -> Result<RestoreOutcome> {
    if inputs.is_empty() {
        return Err(Error::Usage("no input images given".into()));
    }
    ensure_out_dir(out_dir)?;
    match raw.precision() {
        Precision::Single => {
            let net: Network<f32> = raw.instantiate(ckpt_path)?;
            restore_all(&net, inputs, out_dir, derive)
        }
        Precision::Double => {
            let net: Network<f64> = raw.instantiate(ckpt_path)?;
            restore_all(&net, inputs, out_dir, derive)
        }
    }
}

fn restore_all<S: Scalar>(
    net: &Network<S>,
    inputs: &[PathBuf],
    out_dir: &Path,
    derive: &mut dyn FnMut(&Path, usize) -> Result<(GrayImage, GrayImage)>,
) -> Result<RestoreOutcome> {
    let mut report = QualityReport::default();
    let mut outputs = Vec::with_capacity(inputs.len());
    for (idx, input_path) in inputs.iter().enumerate() {
        let (input, reference) = derive(input_path, idx)?;
        let (restored, runtime_s) = restore_image(net, &input)?;
        let out_path = output_path(out_dir, input_path, "restored");
        save_image(&restored, &out_path)?;
        let stem = out_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        report.rows.push(QualityRow {
            image: stem,
            psnr_db: psnr(&restored, &reference, 255.0)?,
            ssim: ssim(&restored, &reference)?,
            runtime_s,
        });
        outputs.push(out_path);
    }
    let report_csv = out_dir.join("report.csv");
    std::fs::write(&report_csv, report.to_csv()).map_err(|e| Error::io(&report_csv, e))?;
    print!("{}", report.to_markdown());
    println!(
        "mean: {:.2} dB / ssim {:.4} over {} image(s); outputs in {}",
        report.mean_psnr(),
        report.mean_ssim(),
        report.rows.len(),
        out_dir.display()
    );
    Ok(RestoreOutcome { report, report_csv, outputs })
}
