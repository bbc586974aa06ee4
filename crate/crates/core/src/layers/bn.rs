//! Per-channel batch normalization.
//!
//! Train mode normalizes with biased batch statistics over `(n, h, w)`:
//! `y = gamma * (x - mean) / sqrt(var + eps) + beta`, and folds the batch
//! stats into the running estimates as
//! `running <- (1 - momentum) * running + momentum * batch`. Eval mode uses
//! the running estimates only. The backward pass differentiates through the
//! batch statistics, so per-channel gradients sum to ~0 when `gamma = 1`.
//! Mode selection lives at the network level: callers pick
//! [`bn_forward_train`] or [`bn_forward_eval`].

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

#[derive(Debug, Clone, PartialEq)]
pub struct BNParams<S> {
    pub gamma: Vec<S>,
    pub beta: Vec<S>,
    pub running_mean: Vec<S>,
    pub running_var: Vec<S>,
    /// Weight of the fresh batch statistics in the running update.
    pub momentum: f64,
    pub eps: f64,
}

/// Batch statistics captured by [`bn_forward_train`], needed by
/// [`bn_backward`]. The variance is the biased (1/m) estimate.
#[derive(Debug, Clone)]
pub struct BnCache<S> {
    pub mean: Vec<S>,
    pub var: Vec<S>,
}

#[derive(Debug, Clone)]
pub struct BnGrads<S> {
    pub gamma: Vec<S>,
    pub beta: Vec<S>,
}

fn check_channels<S: Scalar>(p: &BNParams<S>, x: &Tensor4<S>) -> Result<()> {
    let c = p.gamma.len();
    if p.beta.len() != c || p.running_mean.len() != c || p.running_var.len() != c {
        return Err(Error::InvalidConfig(format!(
            "batch-norm parameter vectors disagree on channel count: gamma {}, beta {}, mean {}, var {}",
            p.gamma.len(), p.beta.len(), p.running_mean.len(), p.running_var.len()
        )));
    }
    if x.channels() != c {
        return Err(Error::ChannelMismatch { input: x.channels(), expected: c });
    }
    Ok(())
}

/// Visit every value of channel `c` in sample-major order.
#[inline]
fn for_channel<S: Scalar>(x: &Tensor4<S>, c: usize, mut f: impl FnMut(S)) {
    let (n, _, h, w) = x.shape();
    let hw = h * w;
    for s in 0..n {
        for &v in &x.sample(s)[c * hw..(c + 1) * hw] {
            f(v);
        }
    }
}

/// Normalize with batch statistics, update the running estimates, and return
/// the output plus the cache the backward pass needs.
pub fn bn_forward_train<S: Scalar>(
    x: &Tensor4<S>,
    p: &mut BNParams<S>,
) -> Result<(Tensor4<S>, BnCache<S>)> {
    check_channels(p, x)?;
    let (n, c, h, w) = x.shape();
    let m = n * h * w;
    if m == 1 {
        return Err(Error::DegenerateBatch);
    }
    let hw = h * w;
    let mut mean = vec![S::zero(); c];
    let mut var = vec![S::zero(); c];
    let mut out = x.zeros_like();
    for ch in 0..c {
        let mut sum = 0.0f64;
        for_channel(x, ch, |v| sum += v.to_f64());
        let mu = sum / m as f64;
        let mut sq = 0.0f64;
        for_channel(x, ch, |v| {
            let d = v.to_f64() - mu;
            sq += d * d;
        });
        let mean_s = S::from_f64(mu);
        let var_s = S::from_f64(sq / m as f64);
        mean[ch] = mean_s;
        var[ch] = var_s;

        let inv_std = (var_s + S::from_f64(p.eps)).sqrt().recip();
        let (g, b) = (p.gamma[ch], p.beta[ch]);
        for s in 0..n {
            let dst = &mut out.sample_mut(s)[ch * hw..(ch + 1) * hw];
            let src = &x.sample(s)[ch * hw..(ch + 1) * hw];
            for (o, &v) in dst.iter_mut().zip(src) {
                *o = g * (v - mean_s) * inv_std + b;
            }
        }

        let keep = S::from_f64(1.0 - p.momentum);
        let fresh = S::from_f64(p.momentum);
        p.running_mean[ch] = keep * p.running_mean[ch] + fresh * mean_s;
        p.running_var[ch] = keep * p.running_var[ch] + fresh * var_s;
    }
    Ok((out, BnCache { mean, var }))
}

/// Normalize with the running estimates; pure, no state update.
pub fn bn_forward_eval<S: Scalar>(x: &Tensor4<S>, p: &BNParams<S>) -> Result<Tensor4<S>> {
    check_channels(p, x)?;
    let (n, c, _, w) = x.shape();
    let hw = x.height() * w;
    let mut out = x.zeros_like();
    for ch in 0..c {
        let inv_std = (p.running_var[ch] + S::from_f64(p.eps)).sqrt().recip();
        let (g, b, mu) = (p.gamma[ch], p.beta[ch], p.running_mean[ch]);
        for s in 0..n {
            let dst = &mut out.sample_mut(s)[ch * hw..(ch + 1) * hw];
            let src = &x.sample(s)[ch * hw..(ch + 1) * hw];
            for (o, &v) in dst.iter_mut().zip(src) {
                *o = g * (v - mu) * inv_std + b;
            }
        }
    }
    Ok(out)
}

/// Backward through train-mode normalization, including the dependence of the
/// batch statistics on `x`.
pub fn bn_backward<S: Scalar>(
    x: &Tensor4<S>,
    p: &BNParams<S>,
    cache: &BnCache<S>,
    grad_out: &Tensor4<S>,
) -> Result<(Tensor4<S>, BnGrads<S>)> {
    check_channels(p, x)?;
    if grad_out.shape() != x.shape() {
        return Err(Error::shapes(grad_out.shape(), x.shape()));
    }
    if cache.mean.len() != p.gamma.len() || cache.var.len() != p.gamma.len() {
        return Err(Error::InvalidConfig("batch-norm cache does not match parameters".into()));
    }
    let (n, c, h, w) = x.shape();
    let m = (n * h * w) as f64;
    let hw = h * w;
    let mut gx = x.zeros_like();
    let mut grads = BnGrads { gamma: vec![S::zero(); c], beta: vec![S::zero(); c] };
    for ch in 0..c {
        let mean = cache.mean[ch];
        let inv_std = (cache.var[ch] + S::from_f64(p.eps)).sqrt().recip();
        let gamma = p.gamma[ch];

        // Channel reductions, accumulated in f64 in a fixed order.
        let mut sum_g = 0.0f64;
        let mut sum_g_xhat = 0.0f64;
        for s in 0..n {
            let xs = &x.sample(s)[ch * hw..(ch + 1) * hw];
            let gs = &grad_out.sample(s)[ch * hw..(ch + 1) * hw];
            for (&xv, &gv) in xs.iter().zip(gs) {
                let xhat = ((xv - mean) * inv_std).to_f64();
                sum_g += gv.to_f64();
                sum_g_xhat += gv.to_f64() * xhat;
            }
        }
        grads.beta[ch] = S::from_f64(sum_g);
        grads.gamma[ch] = S::from_f64(sum_g_xhat);

        // dL/dx = (gamma * inv_std / m) * (m * g - sum_g - xhat * sum_g_xhat)
        let scale = gamma.to_f64() * inv_std.to_f64() / m;
        for s in 0..n {
            let xs = &x.sample(s)[ch * hw..(ch + 1) * hw];
            let gs = &grad_out.sample(s)[ch * hw..(ch + 1) * hw];
            let ds = &mut gx.sample_mut(s)[ch * hw..(ch + 1) * hw];
            for ((&xv, &gv), d) in xs.iter().zip(gs).zip(ds.iter_mut()) {
                let xhat = ((xv - mean) * inv_std).to_f64();
                *d = S::from_f64(scale * (m * gv.to_f64() - sum_g - xhat * sum_g_xhat));
            }
        }
    }
    Ok((gx, grads))
}
