//! Restoration-quality metrics (PSNR, SSIM) and the rolling deviation used
//! to quantify training stability.

use crate::data::GrayImage;
use crate::error::{Error, Result};

/// `10·log10(peak²/mse)`; infinite for `mse == 0`.
pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse <= 0.0 {
        return f64::INFINITY;
    }
    10.0 * (peak * peak / mse).log10()
}

/// Peak signal-to-noise ratio in dB on the 0–255 scale. Identical images
/// yield the infinity sentinel. Symmetric in its arguments.
pub fn psnr(a: &GrayImage, b: &GrayImage, peak: f64) -> Result<f64> {
    Ok(psnr_from_mse(a.mse(b)?, peak))
}

const SSIM_WINDOW: usize = 11;

/// Normalized 11×11 Gaussian window, sigma 1.5.
fn ssim_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let sigma = 1.5f64;
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut total = 0.0;
    for y in 0..SSIM_WINDOW {
        for x in 0..SSIM_WINDOW {
            let d2 = (y as f64 - c).powi(2) + (x as f64 - c).powi(2);
            let v = (-d2 / (2.0 * sigma * sigma)).exp();
            w[y * SSIM_WINDOW + x] = v;
            total += v;
        }
    }
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Mean structural similarity over all fully-contained 11×11 windows,
/// Gaussian-weighted (sigma 1.5), K1 = 0.01, K2 = 0.03 on the 0–255 scale.
/// `ssim(a, a)` is exactly 1; the metric is symmetric.
pub fn ssim(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::ShapeMismatch {
            left: format!("{}x{}", a.height(), a.width()),
            right: format!("{}x{}", b.height(), b.width()),
        });
    }
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::ImageTooSmall { h, w, need: SSIM_WINDOW });
    }
    let win = ssim_window();
    let c1 = (0.01f64 * 255.0) * (0.01f64 * 255.0);
    let c2 = (0.03f64 * 255.0) * (0.03f64 * 255.0);
    let mut sum = 0.0;
    let rows = h - SSIM_WINDOW + 1;
    let cols = w - SSIM_WINDOW + 1;
    for top in 0..rows {
        for left in 0..cols {
            let mut ma = 0.0;
            let mut mb = 0.0;
            let mut saa = 0.0;
            let mut sbb = 0.0;
            let mut sab = 0.0;
            for wy in 0..SSIM_WINDOW {
                let ra = &a.row(top + wy)[left..left + SSIM_WINDOW];
                let rb = &b.row(top + wy)[left..left + SSIM_WINDOW];
                let wr = &win[wy * SSIM_WINDOW..(wy + 1) * SSIM_WINDOW];
                for ((&va, &vb), &wv) in ra.iter().zip(rb).zip(wr) {
                    ma += wv * va;
                    mb += wv * vb;
                    // The pixel product is formed first so swapping the two
                    // images reproduces identical roundings (va·vb == vb·va).
                    saa += wv * (va * va);
                    sbb += wv * (vb * vb);
                    sab += wv * (va * vb);
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cab = sab - ma * mb;
            // Numerator and denominator use structurally parallel
            // expressions so equal inputs give exactly num == den.
            let num = (2.0 * ma * mb + c1) * (2.0 * cab + c2);
            let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            sum += num / den;
        }
    }
    Ok(sum / (rows * cols) as f64)
}

/// Sliding-window sample standard deviations (n−1 normalization) of a loss
/// series; output length `len − window + 1`.
pub fn rolling_std(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 2 || window > series.len() {
        return Err(Error::BadWindow { window, len: series.len() });
    }
    let n = window as f64;
    Ok(series
        .windows(window)
        .map(|w| {
            let mean = w.iter().sum::<f64>() / n;
            let ss = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
            (ss / (n - 1.0)).sqrt()
        })
        .collect())
}

/// Loss series plus its rolling deviation: the fluctuation summary used to
/// compare training stability across models.
#[derive(Debug, Clone)]
pub struct StabilitySeries {
    pub window: usize,
    pub stds: Vec<f64>,
}

impl StabilitySeries {
    pub fn from_series(series: &[f64], window: usize) -> Result<Self> {
        Ok(StabilitySeries { window, stds: rolling_std(series, window)? })
    }

    pub fn mean(&self) -> f64 {
        if self.stds.is_empty() {
            return 0.0;
        }
        self.stds.iter().sum::<f64>() / self.stds.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.stds.iter().copied().fold(0.0, f64::max)
    }
}

/// Per-image quality results plus aggregates.
#[derive(Debug, Clone)]
pub struct QualityRow {
    pub image: String,
    pub psnr_db: f64,
    pub ssim: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Default)]
pub struct QualityReport {
    pub rows: Vec<QualityRow>,
}

impl QualityReport {
    /// Mean PSNR over rows with finite PSNR (identical images excluded).
    pub fn mean_psnr(&self) -> f64 {
        let finite: Vec<f64> = self
            .rows
            .iter()
            .map(|r| r.psnr_db)
            .filter(|v| v.is_finite())
            .collect();
        if finite.is_empty() {
            return f64::INFINITY;
        }
        finite.iter().sum::<f64>() / finite.len() as f64
    }

    pub fn mean_ssim(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.ssim).sum::<f64>() / self.rows.len() as f64
    }

    pub fn mean_runtime(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.runtime_s).sum::<f64>() / self.rows.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("image,psnr_db,ssim,runtime_s\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.image, r.psnr_db, r.ssim, r.runtime_s));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| image | PSNR (dB) | SSIM | time (s) |\n|---|---|---|---|\n");
        for r in &self.rows {
            let psnr = if r.psnr_db.is_finite() {
                format!("{:.4}", r.psnr_db)
            } else {
                "identical".to_string()
            };
            out.push_str(&format!(
                "| {} | {} | {:.6} | {:.4} |\n",
                r.image, psnr, r.ssim, r.runtime_s
            ));
        }
        out.push_str(&format!(
            "| **mean** | {:.4} | {:.6} | {:.4} |\n",
            self.mean_psnr(),
            self.mean_ssim(),
            self.mean_runtime()
        ));
        out
    }
}
