//! Stride-1, same-padding 2-D convolution and its transpose.
//!
//! The convention is cross-correlation (no kernel flip), padding `(k-1)/2` on
//! every side, so spatial dims are preserved. The engine lowers each sample to
//! an im2col matrix and runs a GEMM; 1x1 kernels skip the lowering and
//! multiply the sample directly. Work parallelizes over the batch axis only
//! (see [`crate::threads`]), keeping results bitwise independent of the
//! thread count: per-sample weight-gradient contributions are reduced
//! sequentially in sample order.
//!
//! Weight layout is `(out_channels, in_channels, k, k)` for convolution. For
//! the transposed op the same struct stores `(in_channels, out_channels, k,
//! k)` — the axes of the convolution it is the adjoint of — and
//! `tconv_forward(x, W)` equals `conv_forward(x, W')` where `W'` swaps the
//! channel axes and flips both kernel axes. At stride 1 that identity is
//! exact, and the implementation uses it directly.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;
use crate::threads::{for_each_span, for_each_span2, thread_count};

/// Parameters of a conv or tconv layer. `bias` is present only on layers not
/// followed by batch normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<S> {
    pub weights: Tensor4<S>,
    pub bias: Option<Vec<S>>,
}

/// Gradients produced by [`conv_backward`] / [`tconv_backward`], shaped like
/// the corresponding [`ConvParams`].
#[derive(Debug, Clone)]
pub struct ConvGrads<S> {
    pub weights: Tensor4<S>,
    pub bias: Option<Vec<S>>,
}

impl<S: Scalar> ConvParams<S> {
    /// Kernel size (square kernels only).
    pub fn k(&self) -> usize {
        self.weights.height()
    }

    /// Same-padding margin `(k-1)/2`.
    pub fn pad(&self) -> usize {
        (self.k() - 1) / 2
    }

    fn validate(&self, x: &Tensor4<S>, in_channels: usize, out_channels: usize) -> Result<()> {
        let k = self.weights.height();
        if k != self.weights.width() || k % 2 == 0 {
            return Err(Error::BadKernel(k));
        }
        if x.channels() != in_channels {
            return Err(Error::ChannelMismatch { input: x.channels(), expected: in_channels });
        }
        if let Some(b) = &self.bias {
            if b.len() != out_channels {
                return Err(Error::shapes(format!("bias of {}", b.len()), format!("{out_channels} channels")));
            }
        }
        Ok(())
    }
}

/// Swap the channel axes and flip both kernel axes: the weight transform that
/// turns a transposed convolution into a plain one (and back; it is an
/// involution).
fn swap_flip<S: Scalar>(w: &Tensor4<S>) -> Tensor4<S> {
    let (a, b, k, _) = w.shape();
    let mut out = Tensor4::zeros(b, a, k, k).expect("swapped weight shape is valid");
    for i in 0..a {
        for j in 0..b {
            for ky in 0..k {
                for kx in 0..k {
                    *out.at_mut(j, i, ky, kx) = w.at(i, j, k - 1 - ky, k - 1 - kx);
                }
            }
        }
    }
    out
}

/// Lower one `(ic, h, w)` sample into a `(ic*k*k, h*w)` matrix: row
/// `(ci*k + ky)*k + kx`, column `y*w + x` holds the input pixel at
/// `(ci, y+ky-pad, x+kx-pad)`, or zero outside the image.
fn im2col<S: Scalar>(src: &[S], ic: usize, h: usize, w: usize, k: usize, cols: &mut [S]) {
    let pad = (k - 1) / 2;
    let hw = h * w;
    debug_assert_eq!(src.len(), ic * hw);
    debug_assert_eq!(cols.len(), ic * k * k * hw);
    let mut row = 0;
    for ci in 0..ic {
        let plane = &src[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let dst = &mut cols[row * hw..(row + 1) * hw];
                row += 1;
                // Valid output x-range for this tap: 0 <= x + kx - pad < w.
                let x_lo = pad.saturating_sub(kx);
                let x_hi = (w + pad).saturating_sub(kx).min(w);
                for y in 0..h {
                    let drow = &mut dst[y * w..(y + 1) * w];
                    let sy = y as isize + ky as isize - pad as isize;
                    if sy < 0 || sy >= h as isize || x_lo >= x_hi {
                        drow.fill(S::zero());
                        continue;
                    }
                    let srow = &plane[sy as usize * w..(sy as usize + 1) * w];
                    drow[..x_lo].fill(S::zero());
                    drow[x_hi..].fill(S::zero());
                    let s_lo = x_lo + kx - pad;
                    drow[x_lo..x_hi].copy_from_slice(&srow[s_lo..s_lo + (x_hi - x_lo)]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add a `(ic*k*k, h*w)` matrix back onto a
/// `(ic, h, w)` sample.
fn col2im_add<S: Scalar>(cols: &[S], ic: usize, h: usize, w: usize, k: usize, dst: &mut [S]) {
    let pad = (k - 1) / 2;
    let hw = h * w;
    debug_assert_eq!(dst.len(), ic * hw);
    let mut row = 0;
    for ci in 0..ic {
        let plane = &mut dst[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let src = &cols[row * hw..(row + 1) * hw];
                row += 1;
                let x_lo = pad.saturating_sub(kx);
                let x_hi = (w + pad).saturating_sub(kx).min(w);
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad as isize;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let s_lo = x_lo + kx - pad;
                    let prow = &mut plane[sy as usize * w + s_lo..sy as usize * w + s_lo + (x_hi - x_lo)];
                    let srow = &src[y * w + x_lo..y * w + x_hi];
                    for (p, &s) in prow.iter_mut().zip(srow) {
                        *p += s;
                    }
                }
            }
        }
    }
}

fn add_bias<S: Scalar>(sample: &mut [S], bias: &[S], hw: usize) {
    for (o, &b) in bias.iter().enumerate() {
        for v in &mut sample[o * hw..(o + 1) * hw] {
            *v += b;
        }
    }
}

/// Convolve `x` `(n, ic, h, w)` with `p` `(oc, ic, k, k)` producing
/// `(n, oc, h, w)`.
pub fn conv_forward<S: Scalar>(x: &Tensor4<S>, p: &ConvParams<S>) -> Result<Tensor4<S>> {
    conv_forward_with_threads(x, p, thread_count())
}

/// [`conv_forward`] with an explicit worker cap; the result does not depend
/// on `threads`.
pub fn conv_forward_with_threads<S: Scalar>(
    x: &Tensor4<S>,
    p: &ConvParams<S>,
    threads: usize,
) -> Result<Tensor4<S>> {
    let (oc, ic, k, _) = p.weights.shape();
    p.validate(x, ic, oc)?;
    let (n, _, h, w) = x.shape();
    let hw = h * w;
    let kk = ic * k * k;
    let mut out = Tensor4::zeros(n, oc, h, w)?;
    let wmat = p.weights.data();
    for_each_span(threads, out.data_mut(), oc * hw, |base, span| {
        let mut cols = if k == 1 { Vec::new() } else { vec![S::zero(); kk * hw] };
        for (i, chunk) in span.chunks_mut(oc * hw).enumerate() {
            let sample = x.sample(base + i);
            if k == 1 {
                S::gemm(oc, ic, hw, S::one(), wmat, ic as isize, 1, sample, hw as isize, 1, S::zero(), chunk);
            } else {
                im2col(sample, ic, h, w, k, &mut cols);
                S::gemm(oc, kk, hw, S::one(), wmat, kk as isize, 1, &cols, hw as isize, 1, S::zero(), chunk);
            }
            if let Some(b) = &p.bias {
                add_bias(chunk, b, hw);
            }
        }
    });
    Ok(out)
}

/// Gradients of the convolution: returns `(grad_x, grads)` given the forward
/// input and the gradient w.r.t. the output.
pub fn conv_backward<S: Scalar>(
    x: &Tensor4<S>,
    p: &ConvParams<S>,
    grad_out: &Tensor4<S>,
) -> Result<(Tensor4<S>, ConvGrads<S>)> {
    conv_backward_with_threads(x, p, grad_out, thread_count())
}

/// [`conv_backward`] with an explicit worker cap; the result does not depend
/// on `threads`.
pub fn conv_backward_with_threads<S: Scalar>(
    x: &Tensor4<S>,
    p: &ConvParams<S>,
    grad_out: &Tensor4<S>,
    threads: usize,
) -> Result<(Tensor4<S>, ConvGrads<S>)> {
    let (oc, ic, k, _) = p.weights.shape();
    p.validate(x, ic, oc)?;
    let (n, _, h, w) = x.shape();
    if grad_out.shape() != (n, oc, h, w) {
        return Err(Error::shapes(grad_out.shape(), (n, oc, h, w)));
    }
    let hw = h * w;
    let kk = ic * k * k;
    let wlen = p.weights.len();
    let wmat = p.weights.data();

    let mut gx = x.zeros_like();
    // One weight-gradient slot per sample; summed in sample order afterwards
    // so the reduction is identical for every thread count.
    let mut per_sample_gw = vec![S::zero(); n * wlen];
    for_each_span2(
        threads,
        gx.data_mut(), ic * hw,
        &mut per_sample_gw, wlen,
        |base, gx_span, gw_span| {
            let mut cols = if k == 1 { Vec::new() } else { vec![S::zero(); kk * hw] };
            let mut cols_grad = if k == 1 { Vec::new() } else { vec![S::zero(); kk * hw] };
            let iter = gx_span.chunks_mut(ic * hw).zip(gw_span.chunks_mut(wlen));
            for (i, (gx_chunk, gw_chunk)) in iter.enumerate() {
                let sample = x.sample(base + i);
                let g = grad_out.sample(base + i);
                if k == 1 {
                    // gw_n = g (oc x hw) @ x^T (hw x ic)
                    S::gemm(oc, hw, ic, S::one(), g, hw as isize, 1, sample, 1, hw as isize, S::zero(), gw_chunk);
                    // gx_n = W^T (ic x oc) @ g (oc x hw)
                    S::gemm(ic, oc, hw, S::one(), wmat, 1, ic as isize, g, hw as isize, 1, S::zero(), gx_chunk);
                } else {
                    im2col(sample, ic, h, w, k, &mut cols);
                    // gw_n = g (oc x hw) @ cols^T (hw x kk)
                    S::gemm(oc, hw, kk, S::one(), g, hw as isize, 1, &cols, 1, hw as isize, S::zero(), gw_chunk);
                    // cols_grad = W^T (kk x oc) @ g (oc x hw), scattered back.
                    S::gemm(kk, oc, hw, S::one(), wmat, 1, kk as isize, g, hw as isize, 1, S::zero(), &mut cols_grad);
                    col2im_add(&cols_grad, ic, h, w, k, gx_chunk);
                }
            }
        },
    );

    let mut gw = Tensor4::zeros(oc, ic, k, k)?;
    for chunk in per_sample_gw.chunks(wlen) {
        for (acc, &v) in gw.data_mut().iter_mut().zip(chunk) {
            *acc += v;
        }
    }

    let gb = p.bias.as_ref().map(|_| {
        let mut gb = vec![S::zero(); oc];
        for s in 0..n {
            let g = grad_out.sample(s);
            for (o, acc) in gb.iter_mut().enumerate() {
                for &v in &g[o * hw..(o + 1) * hw] {
                    *acc += v;
                }
            }
        }
        gb
    });

    Ok((gx, ConvGrads { weights: gw, bias: gb }))
}

/// Transposed convolution at stride 1: `p.weights` is `(ic, oc, k, k)` —
/// input channels first — and the output again keeps the spatial dims.
pub fn tconv_forward<S: Scalar>(x: &Tensor4<S>, p: &ConvParams<S>) -> Result<Tensor4<S>> {
    let equivalent = ConvParams { weights: swap_flip(&p.weights), bias: p.bias.clone() };
    conv_forward(x, &equivalent)
}

/// Gradients of [`tconv_forward`], with `grads.weights` in the same
/// `(ic, oc, k, k)` layout as the parameters.
pub fn tconv_backward<S: Scalar>(
    x: &Tensor4<S>,
    p: &ConvParams<S>,
    grad_out: &Tensor4<S>,
) -> Result<(Tensor4<S>, ConvGrads<S>)> {
    let equivalent = ConvParams { weights: swap_flip(&p.weights), bias: p.bias.clone() };
    let (gx, grads) = conv_backward(x, &equivalent, grad_out)?;
    Ok((gx, ConvGrads { weights: swap_flip(&grads.weights), bias: grads.bias }))
}
