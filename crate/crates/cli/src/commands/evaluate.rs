//! Held-out evaluation: corrupt each clean image the way the checkpoint's
//! task does, restore it, and report quality side by side with the
//! uncorrected input baseline (for super-resolution the input baseline is
//! exactly the interpolated image the network starts from).

use std::path::{Path, PathBuf};

use rcnet_core::data::save_image;
use rcnet_core::layers::mix_seed;
use rcnet_core::metrics::{psnr, ssim, QualityReport, QualityRow};
use rcnet_core::model::Network;
use rcnet_core::{Precision, Scalar};

use crate::checkpoint::{self, RawCheckpoint};
use crate::commands::common::{corrupt_clean, ensure_out_dir, restore_image};
use crate::config::Task;
use crate::error::{Error, Result};

#[derive(Debug)]
pub struct EvalOutcome {
    /// Quality of the corrupted inputs against the clean references.
    pub input: QualityReport,
    /// Quality of the network outputs against the clean references.
    pub restored: QualityReport,
    pub input_csv: PathBuf,
    pub restored_csv: PathBuf,
}

impl EvalOutcome {
    pub fn psnr_gain_db(&self) -> f64 {
        self.restored.mean_psnr() - self.input.mean_psnr()
    }

    pub fn ssim_gain(&self) -> f64 {
        self.restored.mean_ssim() - self.input.mean_ssim()
    }
}

pub fn cmd_evaluate(
    ckpt_path: &Path,
    manifest: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    save_images: bool,
    limit: Option<usize>,
) -> Result<EvalOutcome> {
    let raw = checkpoint::load(ckpt_path)?;
    let seed = seed.unwrap_or(raw.config.seed);
    ensure_out_dir(out_dir)?;
    let mut images = crate::commands::common::load_named_images(
        manifest.to_str().ok_or_else(|| Error::Usage("manifest path is not UTF-8".into()))?,
    )?;
    if let Some(n) = limit {
        images.truncate(n);
    }
    if images.is_empty() {
        return Err(Error::Usage("evaluation manifest lists no images".into()));
    }

    match raw.precision() {
        Precision::Single => {
            let net: Network<f32> = raw.instantiate(ckpt_path)?;
            evaluate_all(&net, &raw, images, out_dir, seed, save_images)
        }
        Precision::Double => {
            let net: Network<f64> = raw.instantiate(ckpt_path)?;
            evaluate_all(&net, &raw, images, out_dir, seed, save_images)
        }
    }
}

fn evaluate_all<S: Scalar>(
    net: &Network<S>,
    raw: &RawCheckpoint,
    images: Vec<(String, rcnet_core::data::GrayImage)>,
    out_dir: &Path,
    seed: u64,
    save_images: bool,
) -> Result<EvalOutcome> {
    let cfg = &raw.config;
    // Blind models are scored at every factor they were trained on.
    let factors: Vec<Option<usize>> = match cfg.task {
        Task::SrBlind => cfg.sr_factors.iter().map(|&f| Some(f)).collect(),
        _ => vec![None],
    };

    let mut input_report = QualityReport::default();
    let mut restored_report = QualityReport::default();
    for (i, (name, clean)) in images.iter().enumerate() {
        for &factor in &factors {
            let (input, reference) =
                corrupt_clean(clean, cfg, factor, mix_seed(seed, i as u64))?;
            let (restored, runtime_s) = restore_image(net, &input)?;
            let row_name = match factor {
                Some(f) => format!("{name}_x{f}"),
                None => name.clone(),
            };
            input_report.rows.push(QualityRow {
                image: row_name.clone(),
                psnr_db: psnr(&input.quantized(), &reference, 255.0)?,
                ssim: ssim(&input.quantized(), &reference)?,
                runtime_s: 0.0,
            });
            restored_report.rows.push(QualityRow {
                image: row_name.clone(),
                psnr_db: psnr(&restored, &reference, 255.0)?,
                ssim: ssim(&restored, &reference)?,
                runtime_s,
            });
            if save_images {
                save_image(&restored, out_dir.join(format!("{row_name}_restored.png")))?;
                save_image(&input.quantized(), out_dir.join(format!("{row_name}_input.png")))?;
            }
        }
    }

    let input_csv = out_dir.join("report_input.csv");
    let restored_csv = out_dir.join("report_restored.csv");
    std::fs::write(&input_csv, input_report.to_csv()).map_err(|e| Error::io(&input_csv, e))?;
    std::fs::write(&restored_csv, restored_report.to_csv())
        .map_err(|e| Error::io(&restored_csv, e))?;

    println!("input ({}):", cfg.task.as_str());
    print!("{}", input_report.to_markdown());
    println!("restored:");
    print!("{}", restored_report.to_markdown());
    println!(
        "mean PSNR {:.2} -> {:.2} dB ({:+.2} dB), mean SSIM {:.4} -> {:.4} ({:+.4})",
        input_report.mean_psnr(),
        restored_report.mean_psnr(),
        restored_report.mean_psnr() - input_report.mean_psnr(),
        input_report.mean_ssim(),
        restored_report.mean_ssim(),
        restored_report.mean_ssim() - input_report.mean_ssim(),
    );

    Ok(EvalOutcome {
        input: input_report,
        restored: restored_report,
        input_csv,
        restored_csv,
    })
}
