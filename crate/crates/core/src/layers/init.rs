//! Parameter initialization.
//!
//! Conv and tconv weights draw from `Normal(0, sqrt(2 / fan_in))` with
//! `fan_in = in_channels * k^2`, the scheme that keeps forward variance
//! stable under rectifier activations. Biases start at zero, batch-norm at
//! the identity transform, PReLU slopes at 0.25. All draws come from a
//! counter-based ChaCha stream, so the same seed always reproduces the same
//! parameters bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::layers::{BNParams, ConvParams, PReLUParams};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

/// Derive an independent stream seed from a base seed and a site index
/// (SplitMix64 finalizer), so each layer gets its own reproducible stream.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn he_filled<S: Scalar>(shape: (usize, usize, usize, usize), fan_in: usize, seed: u64) -> Result<Tensor4<S>> {
    debug_assert!(fan_in > 0);
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("std is finite and positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tensor4::zeros(shape.0, shape.1, shape.2, shape.3)?;
    t.fill_with(|| normal.sample(&mut rng));
    Ok(t)
}

fn check_conv_args(out_c: usize, in_c: usize, k: usize) -> Result<()> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::BadKernel(k));
    }
    if out_c == 0 || in_c == 0 {
        return Err(Error::InvalidConfig(format!(
            "conv channels must be >= 1, got {out_c} out, {in_c} in"
        )));
    }
    Ok(())
}

/// Fresh convolution parameters: `(out_c, in_c, k, k)` weights, zero bias if
/// requested.
pub fn init_conv<S: Scalar>(
    out_c: usize,
    in_c: usize,
    k: usize,
    with_bias: bool,
    seed: u64,
) -> Result<ConvParams<S>> {
    check_conv_args(out_c, in_c, k)?;
    Ok(ConvParams {
        weights: he_filled((out_c, in_c, k, k), in_c * k * k, seed)?,
        bias: with_bias.then(|| vec![S::zero(); out_c]),
    })
}

/// Fresh transposed-convolution parameters: `(in_c, out_c, k, k)` weights
/// (input channels first), zero bias if requested. `fan_in` counts the data
/// input channels, as for a plain conv.
pub fn init_tconv<S: Scalar>(
    in_c: usize,
    out_c: usize,
    k: usize,
    with_bias: bool,
    seed: u64,
) -> Result<ConvParams<S>> {
    check_conv_args(out_c, in_c, k)?;
    Ok(ConvParams {
        weights: he_filled((in_c, out_c, k, k), in_c * k * k, seed)?,
        bias: with_bias.then(|| vec![S::zero(); out_c]),
    })
}

/// Identity batch normalization: gamma 1, beta 0, running stats (0, 1).
pub fn init_bn<S: Scalar>(channels: usize) -> BNParams<S> {
    BNParams {
        gamma: vec![S::one(); channels],
        beta: vec![S::zero(); channels],
        running_mean: vec![S::zero(); channels],
        running_var: vec![S::one(); channels],
        momentum: 0.1,
        eps: 1e-5,
    }
}

/// PReLU slopes at the conventional 0.25 starting point.
pub fn init_prelu<S: Scalar>(channels: usize) -> PReLUParams<S> {
    PReLUParams { slope: vec![S::from_f64(0.25); channels] }
}
