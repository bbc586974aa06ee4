//! Grayscale images on the 0–255 scale with binary PGM and PNG round-trip.
//!
//! Pixels are stored as `f64` and may leave [0, 255] (noisy training inputs
//! are deliberately unclipped); saving clamps and rounds to 8-bit.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    h: usize,
    w: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::EmptyDim(1, 1, h, w));
        }
        h.checked_mul(w).ok_or(Error::SizeOverflow(1, 1, h, w))?;
        Ok(GrayImage { h, w, pixels: vec![0.0; h * w] })
    }

    pub fn from_pixels(h: usize, w: usize, pixels: Vec<f64>) -> Result<Self> {
        let mut img = GrayImage::new(h, w)?;
        if pixels.len() != h * w {
            return Err(Error::ShapeMismatch {
                left: format!("{} pixels", pixels.len()),
                right: format!("{h}x{w}"),
            });
        }
        img.pixels = pixels;
        Ok(img)
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn at(&self, y: usize, x: usize) -> f64 {
        self.pixels[y * self.w + x]
    }

    pub fn set(&mut self, y: usize, x: usize, v: f64) {
        self.pixels[y * self.w + x] = v;
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.pixels[y * self.w..(y + 1) * self.w]
    }

    /// Top-left crop.
    pub fn crop(&self, top: usize, left: usize, h: usize, w: usize) -> Result<GrayImage> {
        if top + h > self.h || left + w > self.w {
            return Err(Error::ImageTooSmall { h: self.h, w: self.w, need: (top + h).max(left + w) });
        }
        let mut out = GrayImage::new(h, w)?;
        for y in 0..h {
            let src = &self.pixels[(top + y) * self.w + left..][..w];
            out.pixels[y * w..(y + 1) * w].copy_from_slice(src);
        }
        Ok(out)
    }

    /// Clamp to [0, 255] and round to the nearest integer (8-bit quantize).
    pub fn quantized(&self) -> GrayImage {
        let mut out = self.clone();
        for p in &mut out.pixels {
            *p = p.clamp(0.0, 255.0).round();
        }
        out
    }

    /// Single-image network input: shape (1, 1, h, w), values divided by 255.
    pub fn to_tensor<S: Scalar>(&self) -> Result<Tensor4<S>> {
        let mut t = Tensor4::zeros(1, 1, self.h, self.w)?;
        for (dst, src) in t.data_mut().iter_mut().zip(&self.pixels) {
            *dst = S::from_f64(src / 255.0);
        }
        Ok(t)
    }

    /// Inverse of [`GrayImage::to_tensor`] for a (1, 1, h, w) tensor:
    /// multiply by 255 (no clamping; see [`GrayImage::quantized`]).
    pub fn from_tensor<S: Scalar>(t: &Tensor4<S>) -> Result<GrayImage> {
        if t.batch() != 1 || t.channels() != 1 {
            return Err(Error::shapes(t.shape(), (1usize, 1usize, t.height(), t.width())));
        }
        let mut img = GrayImage::new(t.height(), t.width())?;
        for (dst, src) in img.pixels.iter_mut().zip(t.data()) {
            *dst = (*src).to_f64() * 255.0;
        }
        Ok(img)
    }

    /// Mean squared error on the pixel scale.
    pub fn mse(&self, other: &GrayImage) -> Result<f64> {
        if self.h != other.h || self.w != other.w {
            return Err(Error::ShapeMismatch {
                left: format!("{}x{}", self.h, self.w),
                right: format!("{}x{}", other.h, other.w),
            });
        }
        let sum: f64 = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum / self.pixels.len() as f64)
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::ImageFormat { path: path.display().to_string(), reason: reason.into() }
}

/// Pull the next whitespace-delimited token from a PGM header, skipping
/// `#` comments.
fn pgm_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    if *pos >= bytes.len() {
        return None;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    Some(&bytes[start..*pos])
}

fn pgm_number(bytes: &[u8], pos: &mut usize, what: &str, path: &Path) -> Result<usize> {
    let tok = pgm_token(bytes, pos).ok_or_else(|| format_err(path, format!("missing {what}")))?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format_err(path, format!("bad {what}")))
}

fn load_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(format_err(path, "not a binary PGM (missing P5 magic)"));
    }
    let mut pos = 2;
    let w = pgm_number(&bytes, &mut pos, "width", path)?;
    let h = pgm_number(&bytes, &mut pos, "height", path)?;
    let maxval = pgm_number(&bytes, &mut pos, "maxval", path)?;
    if maxval != 255 {
        return Err(format_err(path, format!("unsupported maxval {maxval} (need 255)")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(format_err(path, "missing raster separator"));
    }
    pos += 1;
    if h == 0 || w == 0 {
        return Err(format_err(path, "zero dimension"));
    }
    let need = h
        .checked_mul(w)
        .ok_or_else(|| format_err(path, "dimensions overflow"))?;
    let raster = &bytes[pos..];
    if raster.len() < need {
        return Err(format_err(
            path,
            format!("truncated raster: {} bytes, need {need}", raster.len()),
        ));
    }
    let pixels = raster[..need].iter().map(|&b| b as f64).collect();
    GrayImage::from_pixels(h, w, pixels)
}

fn save_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", img.w, img.h).into_bytes();
    out.extend(
        img.pixels
            .iter()
            .map(|p| p.clamp(0.0, 255.0).round() as u8),
    );
    std::fs::write(path, out)?;
    Ok(())
}

/// BT.601 luminance of an 8-bit RGB triple, rounded to the nearest integer.
fn luma601(r: u8, g: u8, b: u8) -> f64 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round()
}

fn load_png(path: &Path) -> Result<GrayImage> {
    let reader = image::io::Reader::open(path)?;
    let decoded = reader
        .with_guessed_format()?
        .decode()
        .map_err(|e| format_err(path, e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let pixels: Vec<f64> = match &decoded {
        image::DynamicImage::ImageLuma8(img) => img.pixels().map(|p| p.0[0] as f64).collect(),
        image::DynamicImage::ImageLumaA8(img) => img.pixels().map(|p| p.0[0] as f64).collect(),
        image::DynamicImage::ImageRgb8(img) => {
            img.pixels().map(|p| luma601(p.0[0], p.0[1], p.0[2])).collect()
        }
        image::DynamicImage::ImageRgba8(img) => {
            img.pixels().map(|p| luma601(p.0[0], p.0[1], p.0[2])).collect()
        }
        _ => return Err(format_err(path, "unsupported PNG pixel type (need 8-bit)")),
    };
    GrayImage::from_pixels(h, w, pixels)
}

fn save_png(img: &GrayImage, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = img
        .pixels
        .iter()
        .map(|p| p.clamp(0.0, 255.0).round() as u8)
        .collect();
    image::save_buffer(
        path,
        &bytes,
        img.w as u32,
        img.h as u32,
        image::ColorType::L8,
    )
    .map_err(|e| format_err(path, e.to_string()))
}

/// Load a grayscale image; `.pgm` (binary P5) and `.png` are supported.
/// RGB PNGs are converted by BT.601 luminance.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("pgm") => load_pgm(path),
        Some("png") => load_png(path),
        _ => Err(format_err(path, "unsupported extension (use .pgm or .png)")),
    }
}

/// Save 8-bit grayscale; pixels are clamped to [0, 255] and rounded.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("pgm") => save_pgm(img, path),
        Some("png") => save_png(img, path),
        _ => Err(format_err(path, "unsupported extension (use .pgm or .png)")),
    }
}
