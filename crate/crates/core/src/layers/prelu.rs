//! Parametric ReLU with one learned slope per channel.
//!
//! `y = x` for `x >= 0`, `y = a_c * x` otherwise. The slope gradient
//! accumulates `x * grad_out` over the strictly negative positions of each
//! channel.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

#[derive(Debug, Clone, PartialEq)]
pub struct PReLUParams<S> {
    pub slope: Vec<S>,
}

fn check_channels<S: Scalar>(p: &PReLUParams<S>, x: &Tensor4<S>) -> Result<()> {
    if x.channels() != p.slope.len() {
        return Err(Error::ChannelMismatch { input: x.channels(), expected: p.slope.len() });
    }
    Ok(())
}

pub fn prelu_forward<S: Scalar>(x: &Tensor4<S>, p: &PReLUParams<S>) -> Result<Tensor4<S>> {
    check_channels(p, x)?;
    let (n, c, h, w) = x.shape();
    let hw = h * w;
    let mut out = x.zeros_like();
    for s in 0..n {
        for ch in 0..c {
            let a = p.slope[ch];
            let src = &x.sample(s)[ch * hw..(ch + 1) * hw];
            let dst = &mut out.sample_mut(s)[ch * hw..(ch + 1) * hw];
            for (o, &v) in dst.iter_mut().zip(src) {
                *o = if v >= S::zero() { v } else { a * v };
            }
        }
    }
    Ok(out)
}

/// Returns `(grad_x, grad_slope)`.
pub fn prelu_backward<S: Scalar>(
    x: &Tensor4<S>,
    p: &PReLUParams<S>,
    grad_out: &Tensor4<S>,
) -> Result<(Tensor4<S>, Vec<S>)> {
    check_channels(p, x)?;
    if grad_out.shape() != x.shape() {
        return Err(Error::shapes(grad_out.shape(), x.shape()));
    }
    let (n, c, h, w) = x.shape();
    let hw = h * w;
    let mut gx = x.zeros_like();
    let mut ga = vec![S::zero(); c];
    for s in 0..n {
        for ch in 0..c {
            let a = p.slope[ch];
            let xs = &x.sample(s)[ch * hw..(ch + 1) * hw];
            let gs = &grad_out.sample(s)[ch * hw..(ch + 1) * hw];
            let ds = &mut gx.sample_mut(s)[ch * hw..(ch + 1) * hw];
            let acc = &mut ga[ch];
            for ((&xv, &gv), d) in xs.iter().zip(gs).zip(ds.iter_mut()) {
                if xv >= S::zero() {
                    *d = gv;
                } else {
                    *d = a * gv;
                    *acc += xv * gv;
                }
            }
        }
    }
    Ok((gx, ga))
}
