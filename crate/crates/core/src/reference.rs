//! Test-only reference implementations, written deliberately as direct
//! textbook sums with no shared machinery (no im2col, no GEMM, no
//! separability), plus finite-difference gradient checking and synthetic
//! image generation. Enabled through the `reference` feature; production
//! builds never compile this module.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::GrayImage;
use crate::error::Result;
use crate::layers::ConvParams;
use crate::model::{Mode, Network};
use crate::tensor::Tensor4;

/// Direct seven-loop convolution, zero-padded to keep spatial dims.
/// Weights are (out, in, k, k).
pub fn naive_conv(x: &Tensor4<f64>, p: &ConvParams<f64>) -> Result<Tensor4<f64>> {
    let (oc, ic, k, _) = p.weights.shape();
    let (n, _, h, w) = x.shape();
    let pad = (k / 2) as isize;
    let mut out = Tensor4::zeros(n, oc, h, w)?;
    for ni in 0..n {
        for o in 0..oc {
            let bias = p.bias.as_ref().map_or(0.0, |b| b[o]);
            for y in 0..h as isize {
                for xx in 0..w as isize {
                    let mut acc = bias;
                    for i in 0..ic {
                        for ky in 0..k as isize {
                            for kx in 0..k as isize {
                                let sy = y + ky - pad;
                                let sx = xx + kx - pad;
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                acc += p.weights.at(o, i, ky as usize, kx as usize)
                                    * x.at(ni, i, sy as usize, sx as usize);
                            }
                        }
                    }
                    *out.at_mut(ni, o, y as usize, xx as usize) = acc;
                }
            }
        }
    }
    Ok(out)
}

/// Direct transposed convolution as the adjoint scatter-sum of
/// [`naive_conv`]. Weights are (in, out, k, k): position (y, x) of output
/// channel `o` collects `w[f][o][ky][kx] · x[f][y − ky + pad][x − kx + pad]`.
pub fn naive_tconv(x: &Tensor4<f64>, p: &ConvParams<f64>) -> Result<Tensor4<f64>> {
    let (fc, oc, k, _) = p.weights.shape();
    let (n, _, h, w) = x.shape();
    let pad = (k / 2) as isize;
    let mut out = Tensor4::zeros(n, oc, h, w)?;
    for ni in 0..n {
        for o in 0..oc {
            let bias = p.bias.as_ref().map_or(0.0, |b| b[o]);
            for y in 0..h as isize {
                for xx in 0..w as isize {
                    let mut acc = bias;
                    for f in 0..fc {
                        for ky in 0..k as isize {
                            for kx in 0..k as isize {
                                let sy = y - ky + pad;
                                let sx = xx - kx + pad;
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                acc += p.weights.at(f, o, ky as usize, kx as usize)
                                    * x.at(ni, f, sy as usize, sx as usize);
                            }
                        }
                    }
                    *out.at_mut(ni, o, y as usize, xx as usize) = acc;
                }
            }
        }
    }
    Ok(out)
}

/// Direct (non-separable) bicubic resampling: every output pixel sums its
/// 16 source taps in one 2D loop. Catmull-Rom kernel, center-aligned
/// mapping, edge clamp — the contract the production resizer must match.
pub fn reference_bicubic(img: &GrayImage, out_h: usize, out_w: usize) -> Result<GrayImage> {
    fn kernel(t: f64) -> f64 {
        let a = -0.5;
        let t = t.abs();
        if t <= 1.0 {
            (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0
        } else if t < 2.0 {
            a * (t * t * t - 5.0 * t * t + 8.0 * t - 4.0)
        } else {
            0.0
        }
    }
    let (h, w) = (img.height(), img.width());
    let mut out = GrayImage::new(out_h, out_w)?;
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    for oy in 0..out_h {
        let src_y = (oy as f64 + 0.5) * sy - 0.5;
        let base_y = src_y.floor() as isize;
        for ox in 0..out_w {
            let src_x = (ox as f64 + 0.5) * sx - 0.5;
            let base_x = src_x.floor() as isize;
            let mut acc = 0.0;
            for dy in -1..=2isize {
                let iy = (base_y + dy).clamp(0, h as isize - 1) as usize;
                let wy = kernel(src_y - (base_y + dy) as f64);
                for dx in -1..=2isize {
                    let ix = (base_x + dx).clamp(0, w as isize - 1) as usize;
                    let wx = kernel(src_x - (base_x + dx) as f64);
                    acc += wy * wx * img.at(iy, ix);
                }
            }
            out.set(oy, ox, acc);
        }
    }
    Ok(out)
}

/// Outcome of a finite-difference sweep.
#[derive(Debug, Clone)]
pub struct FdReport {
    /// Worst relative error seen.
    pub max_rel: f64,
    /// Number of scalar entries checked.
    pub checked: usize,
    /// Name of the buffer holding the worst entry.
    pub worst_buffer: String,
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Train-mode MSE loss for the current parameters.
fn loss_of(net: &mut Network<f64>, x: &Tensor4<f64>, target: &Tensor4<f64>) -> Result<f64> {
    net.set_mode(Mode::Train);
    let y = net.forward(x)?;
    y.mse(target)
}

/// Central-difference check of every parameter gradient against backprop.
/// Samples `per_buffer` entries from each parameter buffer (always including
/// the first), stepping each by `h = 1e-5·(|w| + 1)`.
pub fn fd_check_params(
    net: &mut Network<f64>,
    x: &Tensor4<f64>,
    target: &Tensor4<f64>,
    per_buffer: usize,
    seed: u64,
) -> Result<FdReport> {
    // Analytic gradients.
    net.set_mode(Mode::Train);
    let y = net.forward(x)?;
    let scale = 2.0 / y.len() as f64;
    let mut grad = y.clone();
    for (g, t) in grad.data_mut().iter_mut().zip(target.data()) {
        *g = (*g - *t) * scale;
    }
    let (grads, _) = net.backward(&grad)?;
    let mut analytic: Vec<Vec<f64>> = Vec::new();
    grads.visit(&mut |g| analytic.push(g.to_vec()));

    let mut names: Vec<String> = Vec::new();
    net.visit_buffers(&mut |name, kind, _, _| {
        if kind.trainable() {
            names.push(name.to_string());
        }
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FdReport { max_rel: 0.0, checked: 0, worst_buffer: String::new() };
    let buffer_count = analytic.len();
    for bi in 0..buffer_count {
        let len = analytic[bi].len();
        let mut picks = vec![0usize];
        for _ in 1..per_buffer.min(len) {
            picks.push(rng.gen_range(0..len));
        }
        picks.sort_unstable();
        picks.dedup();
        for ei in picks {
            let mut original = 0.0;
            let mut visit_idx = 0;
            net.visit_params_mut(&mut |_, p| {
                if visit_idx == bi {
                    original = p[ei];
                }
                visit_idx += 1;
            });
            let h = 1e-5 * (original.abs() + 1.0);
            let set = |net: &mut Network<f64>, v: f64| {
                let mut idx = 0;
                net.visit_params_mut(&mut |_, p| {
                    if idx == bi {
                        p[ei] = v;
                    }
                    idx += 1;
                });
            };
            set(net, original + h);
            let lp = loss_of(net, x, target)?;
            set(net, original - h);
            let lm = loss_of(net, x, target)?;
            set(net, original);
            let fd = (lp - lm) / (2.0 * h);
            let an = analytic[bi][ei];
            let err = rel_err(fd, an);
            if err > report.max_rel {
                report.max_rel = err;
                report.worst_buffer = names[bi].clone();
            }
            report.checked += 1;
        }
    }
    Ok(report)
}

/// Central-difference check of the gradient w.r.t. the input tensor.
pub fn fd_check_input(
    net: &mut Network<f64>,
    x: &Tensor4<f64>,
    target: &Tensor4<f64>,
    samples: usize,
    seed: u64,
) -> Result<FdReport> {
    net.set_mode(Mode::Train);
    let y = net.forward(x)?;
    let scale = 2.0 / y.len() as f64;
    let mut grad = y.clone();
    for (g, t) in grad.data_mut().iter_mut().zip(target.data()) {
        *g = (*g - *t) * scale;
    }
    let (_, gx) = net.backward(&grad)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FdReport { max_rel: 0.0, checked: 0, worst_buffer: "input".into() };
    let mut probe = x.clone();
    for _ in 0..samples {
        let ei = rng.gen_range(0..x.len());
        let original = probe.data()[ei];
        let h = 1e-5 * (original.abs() + 1.0);
        probe.data_mut()[ei] = original + h;
        let lp = loss_of(net, &probe, target)?;
        probe.data_mut()[ei] = original - h;
        let lm = loss_of(net, &probe, target)?;
        probe.data_mut()[ei] = original;
        let fd = (lp - lm) / (2.0 * h);
        let an = gx.data()[ei];
        let err = rel_err(fd, an);
        if err > report.max_rel {
            report.max_rel = err;
        }
        report.checked += 1;
    }
    Ok(report)
}

/// Deterministic synthetic grayscale "photograph": a smooth gradient
/// background, a few soft elliptical blobs, and a faint sinusoidal texture.
/// Values land in [0, 255]. Same `(h, w, seed)` → identical image.
pub fn synth_image(h: usize, w: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = GrayImage::new(h, w).expect("synth dims");
    let base: f64 = rng.gen_range(60.0..190.0);
    let gx: f64 = rng.gen_range(-40.0..40.0);
    let gy: f64 = rng.gen_range(-40.0..40.0);
    struct Blob {
        cy: f64,
        cx: f64,
        ry: f64,
        rx: f64,
        amp: f64,
    }
    let blobs: Vec<Blob> = (0..rng.gen_range(3..7))
        .map(|_| Blob {
            cy: rng.gen_range(0.0..h as f64),
            cx: rng.gen_range(0.0..w as f64),
            ry: rng.gen_range(0.08..0.4) * h as f64,
            rx: rng.gen_range(0.08..0.4) * w as f64,
            amp: rng.gen_range(-80.0..80.0),
        })
        .collect();
    let fy: f64 = rng.gen_range(1.0..4.0);
    let fx: f64 = rng.gen_range(1.0..4.0);
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let tex_amp: f64 = rng.gen_range(4.0..14.0);
    for y in 0..h {
        for x in 0..w {
            let uy = y as f64 / h as f64;
            let ux = x as f64 / w as f64;
            let mut v = base + gx * (ux - 0.5) + gy * (uy - 0.5);
            for b in &blobs {
                let dy = (y as f64 - b.cy) / b.ry;
                let dx = (x as f64 - b.cx) / b.rx;
                v += b.amp * (-(dy * dy + dx * dx)).exp();
            }
            v += tex_amp * (std::f64::consts::TAU * (fy * uy + fx * ux) + phase).sin();
            img.set(y, x, v.clamp(0.0, 255.0));
        }
    }
    img
}

/// A deterministic batch of synthetic images with per-image derived seeds.
pub fn synth_dataset(count: usize, h: usize, w: usize, seed: u64) -> Vec<GrayImage> {
    (0..count)
        .map(|i| synth_image(h, w, crate::layers::mix_seed(seed, i as u64)))
        .collect()
}
