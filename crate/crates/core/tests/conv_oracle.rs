//! The production conv/tconv engine (im2col + GEMM) against an
//! independent nested-loop reference, plus the exact kernel-flip identity
//! between the two convolution flavors.

use rcnet_core::layers::{conv_forward, tconv_forward, ConvParams};
use rcnet_core::reference::{naive_conv, naive_tconv};
use rcnet_core::tensor::Tensor4;

struct Lcg(u64);

impl Lcg {
    fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    fn next_in(&mut self, lo: usize, hi: usize) -> usize {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        lo + (self.0 >> 33) as usize % (hi - lo + 1)
    }
}

fn random_tensor(rng: &mut Lcg, n: usize, c: usize, h: usize, w: usize) -> Tensor4<f64> {
    let mut t = Tensor4::zeros(n, c, h, w).unwrap();
    t.fill_with(|| rng.next_f64());
    t
}

fn max_rel(a: &Tensor4<f64>, b: &Tensor4<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

#[test]
fn engine_matches_naive_reference_on_fifty_random_cases() {
    let mut rng = Lcg(0x00c0ffee);
    for case in 0..50 {
        let k = [1, 3, 5, 7][case % 4];
        let n = rng.next_in(1, 2);
        let ic = rng.next_in(1, 4);
        let oc = rng.next_in(1, 4);
        let h = rng.next_in(k, k + 6);
        let w = rng.next_in(k, k + 6);
        let x = random_tensor(&mut rng, n, ic, h, w);
        let weights = random_tensor(&mut rng, oc, ic, k, k);
        let bias = if case % 2 == 0 {
            Some((0..oc).map(|_| rng.next_f64()).collect())
        } else {
            None
        };
        let p = ConvParams { weights, bias };
        let fast = conv_forward(&x, &p).unwrap();
        let slow = naive_conv(&x, &p).unwrap();
        let err = max_rel(&fast, &slow);
        assert!(err < 1e-6, "case {case} (k={k}): rel err {err}");
    }
}

#[test]
fn transposed_engine_matches_naive_adjoint_on_random_cases() {
    let mut rng = Lcg(0xdead1234);
    for case in 0..50 {
        let k = [1, 3, 5, 7][case % 4];
        let n = rng.next_in(1, 2);
        let fc = rng.next_in(1, 4);
        let oc = rng.next_in(1, 4);
        let h = rng.next_in(k, k + 6);
        let w = rng.next_in(k, k + 6);
        let x = random_tensor(&mut rng, n, fc, h, w);
        let weights = random_tensor(&mut rng, fc, oc, k, k);
        let bias = if case % 3 == 0 {
            Some((0..oc).map(|_| rng.next_f64()).collect())
        } else {
            None
        };
        let p = ConvParams { weights, bias };
        let fast = tconv_forward(&x, &p).unwrap();
        let slow = naive_tconv(&x, &p).unwrap();
        let err = max_rel(&fast, &slow);
        assert!(err < 1e-6, "case {case} (k={k}): rel err {err}");
    }
}

/// Swap the channel axes and flip both kernel axes — written here from
/// scratch so the identity below does not depend on library internals.
fn flipped_transposed(w: &Tensor4<f64>) -> Tensor4<f64> {
    let (a, b, k, _) = w.shape();
    let mut out = Tensor4::zeros(b, a, k, k).unwrap();
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

#[test]
fn tconv_equals_conv_with_flipped_transposed_kernel_bitwise() {
    let mut rng = Lcg(0x5eed5eed);
    for case in 0..12 {
        let k = [1, 3, 5, 7][case % 4];
        let fc = rng.next_in(1, 3);
        let oc = rng.next_in(1, 3);
        let h = rng.next_in(k, k + 4);
        let w = rng.next_in(k, k + 4);
        let x = random_tensor(&mut rng, 1, fc, h, w);
        let weights = random_tensor(&mut rng, fc, oc, k, k);
        let bias: Option<Vec<f64>> = Some((0..oc).map(|_| rng.next_f64()).collect());
        let p = ConvParams { weights: weights.clone(), bias: bias.clone() };
        let as_tconv = tconv_forward(&x, &p).unwrap();
        let q = ConvParams { weights: flipped_transposed(&weights), bias };
        let as_conv = conv_forward(&x, &q).unwrap();
        let identical = as_tconv
            .data()
            .iter()
            .zip(as_conv.data())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(identical, "case {case} (k={k}): identity must hold bitwise");
    }

    // The identity also holds bitwise in single precision.
    let x64 = random_tensor(&mut rng, 1, 2, 8, 8);
    let w64 = random_tensor(&mut rng, 2, 3, 5, 5);
    let to32 = |t: &Tensor4<f64>| {
        let mut out = Tensor4::<f32>::zeros(t.batch(), t.channels(), t.height(), t.width()).unwrap();
        for (d, s) in out.data_mut().iter_mut().zip(t.data()) {
            *d = *s as f32;
        }
        out
    };
    let x = to32(&x64);
    let weights = to32(&w64);
    let p = ConvParams::<f32> { weights: weights.clone(), bias: None };
    let as_tconv = tconv_forward(&x, &p).unwrap();
    let flipped = {
        let (a, b, k, _) = weights.shape();
        let mut out = Tensor4::<f32>::zeros(b, a, k, k).unwrap();
        for i in 0..a {
            for j in 0..b {
                for ky in 0..k {
                    for kx in 0..k {
                        *out.at_mut(j, i, ky, kx) = weights.at(i, j, k - 1 - ky, k - 1 - kx);
                    }
                }
            }
        }
        out
    };
    let q = ConvParams::<f32> { weights: flipped, bias: None };
    let as_conv = conv_forward(&x, &q).unwrap();
    assert!(as_tconv
        .data()
        .iter()
        .zip(as_conv.data())
        .all(|(a, b)| a.to_bits() == b.to_bits()));
}
