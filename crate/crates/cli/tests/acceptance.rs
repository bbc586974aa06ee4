//! Release gates for the whole engine, one test per gate. Each test prints
//! an `ACCEPTANCE <n> PASS` line with its measured numbers on success and
//! panics with an `ACCEPTANCE <n> FAIL` message otherwise, so a single run
//! of this target is the full checklist. Gates 6-8 train desk-scale
//! networks end to end and take minutes each; everything else is fast.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rcnet_cli::checkpoint;
use rcnet_cli::commands::{cmd_evaluate, cmd_stability, cmd_train, cmd_train_quiet, Variant};
use rcnet_cli::config::{RunConfig, Task};
use rcnet_core::data::{add_gaussian_noise, save_image, GrayImage};
use rcnet_core::layers::{
    bn_backward, bn_forward_train, conv_backward, conv_forward, init_bn, prelu_backward,
    prelu_forward, tconv_backward, tconv_forward, ConvParams, PReLUParams,
};
use rcnet_core::metrics::{psnr, ssim};
use rcnet_core::model::{
    CompositeUnit, NetConfig, NetKind, Network, RCBlockSpec, ReconLayer, ReconOp,
};
use rcnet_core::optim::{train, BatchSource, NoHooks, SGDHyper, TrainLog};
use rcnet_core::reference::{
    fd_check_input, fd_check_params, naive_conv, naive_tconv, synth_dataset, synth_image,
};
use rcnet_core::scalar::Scalar;
use rcnet_core::tensor::Tensor4;

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn check(gate: u32, cond: bool, what: &str) {
    assert!(cond, "ACCEPTANCE {gate} FAIL — {what}");
}

fn pass(gate: u32, detail: &str) {
    println!("ACCEPTANCE {gate} PASS — {detail}");
}

struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    /// Uniform in [0, 1).
    fn unit(&mut self) -> f64 {
        (self.next() + 1.0) / 2.0
    }

    fn next_in(&mut self, lo: usize, hi: usize) -> usize {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        lo + (self.0 >> 33) as usize % (hi - lo + 1)
    }
}

fn random_tensor(rng: &mut Lcg, n: usize, c: usize, h: usize, w: usize) -> Tensor4<f64> {
    let mut t = Tensor4::zeros(n, c, h, w).unwrap();
    t.fill_with(|| rng.next());
    t
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Scalar objective with a known output-gradient: a weighted sum of the
/// output against fixed random coefficients.
fn project(out: &Tensor4<f64>, coef: &Tensor4<f64>) -> f64 {
    out.data().iter().zip(coef.data()).map(|(a, b)| a * b).sum()
}

/// The small single-block topology used by the gradient and overfit gates.
fn tiny_topology() -> NetConfig {
    NetConfig {
        n_dense: 6,
        k_dense: 5,
        num_blocks: 1,
        block: RCBlockSpec { width: 4, k_large: 5, k_small: 3 },
        desk_scale: true,
        ..NetConfig::default()
    }
}

/// Path to a shipped preset, resolved from the crate root.
fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(name)
}

/// Write `images` plus train/val manifests into `dir`; the last `val`
/// images are held out.
fn write_dataset(dir: &Path, images: &[GrayImage], val: usize) -> (PathBuf, PathBuf) {
    let mut train_lines = String::new();
    let mut val_lines = String::new();
    for (i, img) in images.iter().enumerate() {
        let name = format!("img{i:02}.pgm");
        save_image(img, dir.join(&name)).unwrap();
        if i < images.len() - val {
            train_lines.push_str(&name);
            train_lines.push('\n');
        } else {
            val_lines.push_str(&name);
            val_lines.push('\n');
        }
    }
    let train = dir.join("train.txt");
    let val_path = dir.join("val.txt");
    std::fs::write(&train, train_lines).unwrap();
    std::fs::write(&val_path, val_lines).unwrap();
    (train, val_path)
}

/// Synthetic images with extra fine-grained texture (4-8 px periods).
/// A bicubic x2 round trip visibly attenuates structure at those scales,
/// so super-resolution has real detail to recover.
fn textured_dataset(count: usize, h: usize, w: usize, seed: u64) -> Vec<GrayImage> {
    let mut rng = Lcg(seed.wrapping_mul(2862933555777941757) | 1);
    synth_dataset(count, h, w, seed)
        .into_iter()
        .map(|mut img| {
            let tau = std::f64::consts::TAU;
            let p1 = 4.0 + 4.0 * rng.unit();
            let p2 = 4.0 + 4.0 * rng.unit();
            let p3 = 4.0 + 4.0 * rng.unit();
            let p4 = 4.0 + 4.0 * rng.unit();
            let a1 = 18.0 + 12.0 * rng.unit();
            let a2 = 18.0 + 12.0 * rng.unit();
            let ph1 = tau * rng.unit();
            let ph2 = tau * rng.unit();
            for y in 0..h {
                for x in 0..w {
                    let v = img.at(y, x)
                        + a1 * (tau * (y as f64 / p1 + x as f64 / p2) + ph1).sin()
                        + a2 * (tau * (y as f64 / p3 - x as f64 / p4) + ph2).sin();
                    img.set(y, x, v.clamp(0.0, 255.0));
                }
            }
            img
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Gate 1 — analytic gradients vs. central finite differences
// ---------------------------------------------------------------------------

fn conv_layer_worst_fd_error() -> f64 {
    let mut rng = Lcg(11);
    let x = random_tensor(&mut rng, 2, 3, 6, 6);
    let weights = random_tensor(&mut rng, 4, 3, 3, 3);
    let bias: Vec<f64> = (0..4).map(|_| rng.next()).collect();
    let p = ConvParams { weights, bias: Some(bias) };
    let coef = random_tensor(&mut rng, 2, 4, 6, 6);
    let (gx, grads) = conv_backward(&x, &p, &coef).unwrap();

    let mut worst = 0.0f64;
    for ei in (0..x.len()).step_by(17) {
        let mut xp = x.clone();
        let h = 1e-5 * (x.data()[ei].abs() + 1.0);
        xp.data_mut()[ei] += h;
        let lp = project(&conv_forward(&xp, &p).unwrap(), &coef);
        xp.data_mut()[ei] -= 2.0 * h;
        let lm = project(&conv_forward(&xp, &p).unwrap(), &coef);
        worst = worst.max(rel((lp - lm) / (2.0 * h), gx.data()[ei]));
    }
    for ei in (0..p.weights.len()).step_by(13) {
        let mut pp = p.clone();
        let h = 1e-5 * (p.weights.data()[ei].abs() + 1.0);
        pp.weights.data_mut()[ei] += h;
        let lp = project(&conv_forward(&x, &pp).unwrap(), &coef);
        pp.weights.data_mut()[ei] -= 2.0 * h;
        let lm = project(&conv_forward(&x, &pp).unwrap(), &coef);
        worst = worst.max(rel((lp - lm) / (2.0 * h), grads.weights.data()[ei]));
    }
    for ei in 0..4 {
        let mut pp = p.clone();
        let h = 1e-5;
        pp.bias.as_mut().unwrap()[ei] += h;
        let lp = project(&conv_forward(&x, &pp).unwrap(), &coef);
        pp.bias.as_mut().unwrap()[ei] -= 2.0 * h;
        let lm = project(&conv_forward(&x, &pp).unwrap(), &coef);
        worst = worst.max(rel((lp - lm) / (2.0 * h), grads.bias.as_ref().unwrap()[ei]));
    }
    worst
}

fn tconv_layer_worst_fd_error() -> f64 {
    let mut rng = Lcg(23);
    let x = random_tensor(&mut rng, 1, 3, 5, 5);
    let weights = random_tensor(&mut rng, 3, 2, 5, 5);
    let p = ConvParams { weights, bias: Some(vec![rng.next(), rng.next()]) };
    let coef = random_tensor(&mut rng, 1, 2, 5, 5);
    let (gx, grads) = tconv_backward(&x, &p, &coef).unwrap();

    let mut worst = 0.0f64;
    for ei in (0..x.len()).step_by(7) {
        let mut xp = x.clone();
        let h = 1e-5 * (x.data()[ei].abs() + 1.0);
        xp.data_mut()[ei] += h;
        let lp = project(&tconv_forward(&xp, &p).unwrap(), &coef);
        xp.data_mut()[ei] -= 2.0 * h;
        let lm = project(&tconv_forward(&xp, &p).unwrap(), &coef);
        worst = worst.max(rel((lp - lm) / (2.0 * h), gx.data()[ei]));
    }
    for ei in (0..p.weights.len()).step_by(11) {
        let mut pp = p.clone();
        let h = 1e-5 * (p.weights.data()[ei].abs() + 1.0);
        pp.weights.data_mut()[ei] += h;
        let lp = project(&tconv_forward(&x, &pp).unwrap(), &coef);
        pp.weights.data_mut()[ei] -= 2.0 * h;
        let lm = project(&tconv_forward(&x, &pp).unwrap(), &coef);
        worst = worst.max(rel((lp - lm) / (2.0 * h), grads.weights.data()[ei]));
    }
    for ei in 0..2 {
        let mut pp = p.clone();
        let h = 1e-5;
        pp.bias.as_mut().unwrap()[ei] += h;
        let lp = project(&tconv_forward(&x, &pp).unwrap(), &coef);
        pp.bias.as_mut().unwrap()[ei] -= 2.0 * h;
        let lm = project(&tconv_forward(&x, &pp).unwrap(), &coef);
        worst = worst.max(rel((lp - lm) / (2.0 * h), grads.bias.as_ref().unwrap()[ei]));
    }
    worst
}

fn bn_layer_worst_fd_error() -> f64 {
    let mut rng = Lcg(37);
    let x = random_tensor(&mut rng, 3, 2, 4, 4);
    let coef = random_tensor(&mut rng, 3, 2, 4, 4);
    let mut p = init_bn::<f64>(2);
    for g in &mut p.gamma {
        *g = 1.0 + 0.3 * rng.next();
    }
    for b in &mut p.beta {
        *b = 0.3 * rng.next();
    }
    let (_, cache) = bn_forward_train(&x, &mut p.clone()).unwrap();
    let (gx, grads) = bn_backward(&x, &p, &cache, &coef).unwrap();

    // Running statistics mutate, so every probe evaluates a scratch clone.
    let out = |x: &Tensor4<f64>, p: &rcnet_core::layers::BNParams<f64>| {
        let (y, _) = bn_forward_train(x, &mut p.clone()).unwrap();
        y
    };

    let mut worst = 0.0f64;
    for ei in (0..x.len()).step_by(5) {
        let mut xp = x.clone();
        let h = 1e-5 * (x.data()[ei].abs() + 1.0);
        xp.data_mut()[ei] += h;
        let lp = project(&out(&xp, &p), &coef);
        xp.data_mut()[ei] -= 2.0 * h;
        let lm = project(&out(&xp, &p), &coef);
        worst = worst.max(rel((lp - lm) / (2.0 * h), gx.data()[ei]));
    }
    for ei in 0..2 {
        let h = 1e-5;
        let mut pp = p.clone();
        pp.gamma[ei] += h;
        let lp = project(&out(&x, &pp), &coef);
        pp.gamma[ei] -= 2.0 * h;
        let lm = project(&out(&x, &pp), &coef);
        worst = worst.max(rel((lp - lm) / (2.0 * h), grads.gamma[ei]));

        let mut pp = p.clone();
        pp.beta[ei] += h;
        let lp = project(&out(&x, &pp), &coef);
        pp.beta[ei] -= 2.0 * h;
        let lm = project(&out(&x, &pp), &coef);
        worst = worst.max(rel((lp - lm) / (2.0 * h), grads.beta[ei]));
    }
    worst
}

fn prelu_layer_worst_fd_error() -> f64 {
    let mut rng = Lcg(41);
    // Probe points stay away from the hinge at zero so two-sided
    // differences remain valid.
    let mut x = random_tensor(&mut rng, 2, 3, 4, 4);
    for v in x.data_mut() {
        if v.abs() < 0.05 {
            *v += 0.1_f64.copysign(*v + 1e-12);
        }
    }
    let coef = random_tensor(&mut rng, 2, 3, 4, 4);
    let p = PReLUParams { slope: vec![0.25, -0.1, 0.7] };
    let (gx, gslope) = prelu_backward(&x, &p, &coef).unwrap();

    let mut worst = 0.0f64;
    for ei in (0..x.len()).step_by(3) {
        let mut xp = x.clone();
        let h = 1e-6 * (x.data()[ei].abs() + 1.0);
        xp.data_mut()[ei] += h;
        let lp = project(&prelu_forward(&xp, &p).unwrap(), &coef);
        xp.data_mut()[ei] -= 2.0 * h;
        let lm = project(&prelu_forward(&xp, &p).unwrap(), &coef);
        worst = worst.max(rel((lp - lm) / (2.0 * h), gx.data()[ei]));
    }
    for ei in 0..3 {
        let mut pp = p.clone();
        let h = 1e-6;
        pp.slope[ei] += h;
        let lp = project(&prelu_forward(&x, &pp).unwrap(), &coef);
        pp.slope[ei] -= 2.0 * h;
        let lm = project(&prelu_forward(&x, &pp).unwrap(), &coef);
        worst = worst.max(rel((lp - lm) / (2.0 * h), gslope[ei]));
    }
    worst
}

#[test]
fn acceptance_1_gradients_match_finite_differences() {
    let started = Instant::now();

    let conv_err = conv_layer_worst_fd_error();
    check(1, conv_err < 1e-5, &format!("conv layer fd error {conv_err}"));
    let tconv_err = tconv_layer_worst_fd_error();
    check(1, tconv_err < 1e-5, &format!("tconv layer fd error {tconv_err}"));
    let prelu_err = prelu_layer_worst_fd_error();
    check(1, prelu_err < 1e-5, &format!("prelu layer fd error {prelu_err}"));
    let bn_err = bn_layer_worst_fd_error();
    check(1, bn_err < 1e-4, &format!("bn layer fd error {bn_err}"));

    // Whole single-block network, double precision, 9x9 input.
    let mut net: Network<f64> = Network::build(tiny_topology(), 3).unwrap();
    let mut rng = Lcg(231);
    let x = random_tensor(&mut rng, 1, 1, 9, 9);
    let target = random_tensor(&mut rng, 1, 1, 9, 9);
    let params = fd_check_params(&mut net, &x, &target, 4, 3).unwrap();
    check(
        1,
        params.max_rel < 1e-4,
        &format!(
            "whole-net parameter gradients: worst {} at {} over {} probes",
            params.max_rel, params.worst_buffer, params.checked
        ),
    );
    let input = fd_check_input(&mut net, &x, &target, 20, 3).unwrap();
    check(1, input.max_rel < 1e-4, &format!("whole-net input gradient: worst {}", input.max_rel));

    let secs = started.elapsed().as_secs_f64();
    check(1, secs < 120.0, &format!("gradient gate took {secs:.1} s (budget 120 s)"));
    pass(
        1,
        &format!(
            "layer fd errors conv {conv_err:.2e} / tconv {tconv_err:.2e} / prelu {prelu_err:.2e} / bn {bn_err:.2e}; whole net {:.2e} (params) {:.2e} (input) in {secs:.1} s",
            params.max_rel, input.max_rel
        ),
    );
}

// ---------------------------------------------------------------------------
// Gate 2 — engine convolutions vs. the naive nested-loop oracle
// ---------------------------------------------------------------------------

/// Swap the channel axes and flip both kernel axes, written from scratch.
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
fn acceptance_2_convolutions_match_the_naive_oracle() {
    // Fifty random direct-convolution cases, k in {1, 3, 5, 7}.
    let mut rng = Lcg(0x00c0ffee);
    let mut worst_conv = 0.0f64;
    for case in 0..50 {
        let k = [1, 3, 5, 7][case % 4];
        let n = rng.next_in(1, 2);
        let ic = rng.next_in(1, 4);
        let oc = rng.next_in(1, 4);
        let h = rng.next_in(k, k + 6);
        let w = rng.next_in(k, k + 6);
        let x = random_tensor(&mut rng, n, ic, h, w);
        let weights = random_tensor(&mut rng, oc, ic, k, k);
        let bias =
            if case % 2 == 0 { Some((0..oc).map(|_| rng.next()).collect()) } else { None };
        let p = ConvParams { weights, bias };
        let fast = conv_forward(&x, &p).unwrap();
        let slow = naive_conv(&x, &p).unwrap();
        for (a, b) in fast.data().iter().zip(slow.data()) {
            worst_conv = worst_conv.max(rel(*a, *b));
        }
    }
    check(2, worst_conv < 1e-6, &format!("conv vs oracle: worst rel error {worst_conv}"));

    // Fifty random transposed cases against the independent adjoint.
    let mut rng = Lcg(0xdead1234);
    let mut worst_tconv = 0.0f64;
    for case in 0..50 {
        let k = [1, 3, 5, 7][case % 4];
        let n = rng.next_in(1, 2);
        let fc = rng.next_in(1, 4);
        let oc = rng.next_in(1, 4);
        let h = rng.next_in(k, k + 6);
        let w = rng.next_in(k, k + 6);
        let x = random_tensor(&mut rng, n, fc, h, w);
        let weights = random_tensor(&mut rng, fc, oc, k, k);
        let bias =
            if case % 3 == 0 { Some((0..oc).map(|_| rng.next()).collect()) } else { None };
        let p = ConvParams { weights, bias };
        let fast = tconv_forward(&x, &p).unwrap();
        let slow = naive_tconv(&x, &p).unwrap();
        for (a, b) in fast.data().iter().zip(slow.data()) {
            worst_tconv = worst_tconv.max(rel(*a, *b));
        }
    }
    check(2, worst_tconv < 1e-6, &format!("tconv vs oracle: worst rel error {worst_tconv}"));

    // The two flavors are exactly one kernel flip + channel transpose apart.
    let mut rng = Lcg(0x5eed5eed);
    for case in 0..12 {
        let k = [1, 3, 5, 7][case % 4];
        let fc = rng.next_in(1, 3);
        let oc = rng.next_in(1, 3);
        let h = rng.next_in(k, k + 4);
        let w = rng.next_in(k, k + 4);
        let x = random_tensor(&mut rng, 1, fc, h, w);
        let weights = random_tensor(&mut rng, fc, oc, k, k);
        let bias: Option<Vec<f64>> = Some((0..oc).map(|_| rng.next()).collect());
        let p = ConvParams { weights: weights.clone(), bias: bias.clone() };
        let as_tconv = tconv_forward(&x, &p).unwrap();
        let q = ConvParams { weights: flipped_transposed(&weights), bias };
        let as_conv = conv_forward(&x, &q).unwrap();
        let identical = as_tconv
            .data()
            .iter()
            .zip(as_conv.data())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        check(2, identical, &format!("kernel-flip identity broke bitwise on case {case} (k={k})"));
    }

    pass(
        2,
        &format!(
            "100 random cases: conv worst {worst_conv:.2e}, tconv worst {worst_tconv:.2e}; flip identity bitwise on 12 cases"
        ),
    );
}

// ---------------------------------------------------------------------------
// Gate 3 — parameter counts, depth, and closed-form variant deltas
// ---------------------------------------------------------------------------

#[test]
fn acceptance_3_parameter_counts_and_depth_match_closed_forms() {
    let default: Network<f32> = Network::build(NetConfig::default(), 1).unwrap();
    let rc = default.param_count();
    check(
        3,
        (1_700_000..=1_900_000).contains(&rc),
        &format!("default parameter count {rc} outside [1.70M, 1.90M]"),
    );
    check(3, rc == 1_814_081, &format!("default parameter count drifted: {rc}"));
    let depth = default.summarize().len();
    check(3, depth == 21, &format!("default depth report {depth} layers, wanted 21"));

    let win: Network<f32> =
        Network::build(NetConfig { kind: NetKind::Win, ..NetConfig::default() }, 1).unwrap();
    let wn = win.param_count();
    check(
        3,
        (2_300_000..=2_500_000).contains(&wn),
        &format!("wide-baseline parameter count {wn} outside [2.30M, 2.50M]"),
    );
    check(3, wn == 2_417_409, &format!("wide-baseline count drifted: {wn}"));
    check(3, win.summarize().len() == 5, "wide baseline should report 5 layers");

    // Removing one block removes exactly 60*m^2 + 12*m parameters at block
    // width m: four convolutions (1, k_large^2=49, 1, k_small^2=9 taps each,
    // m*m channels, no conv bias under BN) plus 3m per composite for
    // gamma/beta/slope.
    let three: Network<f32> =
        Network::build(NetConfig { num_blocks: 3, ..NetConfig::default() }, 1).unwrap();
    let m = 64usize;
    let per_block = 60 * m * m + 12 * m;
    check(
        3,
        rc - three.param_count() == per_block,
        &format!(
            "block delta {} != closed form {per_block}",
            rc - three.param_count()
        ),
    );
    check(3, three.summarize().len() == 17, "three-block variant should report 17 layers");

    // Removing the second dense composite removes one n x n map with k=7
    // taps plus its gamma/beta/slope: 49*n^2 + 3*n at n = 128.
    let removed: Network<f32> =
        Network::build(NetConfig { remove_second_dense: true, ..NetConfig::default() }, 1)
            .unwrap();
    let n = 128usize;
    let dense2 = 49 * n * n + 3 * n;
    check(
        3,
        rc - removed.param_count() == dense2,
        &format!(
            "second-dense delta {} != closed form {dense2}",
            rc - removed.param_count()
        ),
    );
    check(3, removed.summarize().len() == 20, "dense-removed variant should report 20 layers");

    pass(
        3,
        &format!(
            "default {rc} params / {depth} layers, wide baseline {wn} / 5 layers; block delta {per_block}, second-dense delta {dense2}, both exact"
        ),
    );
}

// ---------------------------------------------------------------------------
// Gate 4 — residual wiring identities
// ---------------------------------------------------------------------------

fn zero_buffers<S: Scalar>(net: &mut Network<S>, prefix: &str) {
    net.visit_buffers_mut(&mut |name, _, data| {
        if name.starts_with(prefix) {
            for v in data.iter_mut() {
                *v = S::from_f64(0.0);
            }
        }
    });
}

/// Zeroed-reconstruction check: with the final layer silenced, the global
/// skip must make the network an exact identity.
fn identity_after_zeroed_recon<S: Scalar>(config: NetConfig, seed: u64, gate: u32) {
    let mut net: Network<S> = Network::build(config, seed).unwrap();
    zero_buffers(&mut net, "recon.");
    let mut rng = Lcg(seed.wrapping_mul(31) | 1);
    for (h, w) in [(9, 9), (16, 24), (33, 17)] {
        let mut x = Tensor4::<S>::zeros(1, 1, h, w).unwrap();
        x.fill_with(|| rng.next());
        let y = net.infer(&x).unwrap();
        let identical = y
            .data()
            .iter()
            .zip(x.data())
            .all(|(a, b)| (*a).to_f64().to_bits() == (*b).to_f64().to_bits());
        check(gate, identical, &format!("zeroed recon is not the bitwise identity at {h}x{w}"));
    }
}

type BufMap = BTreeMap<String, (Vec<usize>, Vec<f64>)>;

fn snapshot(net: &Network<f64>) -> BufMap {
    let mut map = BufMap::new();
    net.visit_buffers(&mut |name, _, dims, data| {
        map.insert(name.to_string(), (dims.to_vec(), data.to_vec()));
    });
    map
}

fn tensor_from(dims: &[usize], data: &[f64]) -> Tensor4<f64> {
    let mut t = Tensor4::zeros(dims[0], dims[1], dims[2], dims[3]).unwrap();
    t.data_mut().copy_from_slice(data);
    t
}

fn conv_params_from(bufs: &BufMap, prefix: &str) -> ConvParams<f64> {
    let (dims, data) = &bufs[&format!("{prefix}.weight")];
    ConvParams {
        weights: tensor_from(dims, data),
        bias: bufs.get(&format!("{prefix}.bias")).map(|(_, b)| b.clone()),
    }
}

fn unit_from(bufs: &BufMap, prefix: &str) -> CompositeUnit<f64> {
    let conv = conv_params_from(bufs, &format!("{prefix}.conv"));
    let bn = bufs.get(&format!("{prefix}.bn.gamma")).map(|(_, gamma)| {
        let mut bn = init_bn::<f64>(gamma.len());
        bn.gamma = gamma.clone();
        bn.beta = bufs[&format!("{prefix}.bn.beta")].1.clone();
        bn.running_mean = bufs[&format!("{prefix}.bn.running_mean")].1.clone();
        bn.running_var = bufs[&format!("{prefix}.bn.running_var")].1.clone();
        bn
    });
    let prelu = bufs
        .get(&format!("{prefix}.prelu.slope"))
        .map(|(_, slope)| PReLUParams { slope: slope.clone() });
    CompositeUnit { conv, bn, prelu }
}

/// The block topology with every post-large-filter composite forced to
/// zero, rebuilt from the same buffers through the same public layer
/// primitives: head composites, then per block only the 1x1 entry and the
/// large filter plus both skips, then expansion, reconstruction, and the
/// global skip.
fn reduced_forward(bufs: &BufMap, x0: &Tensor4<f64>, num_blocks: usize) -> Tensor4<f64> {
    let mut cur = x0.clone();
    for name in ["dense1", "dense2", "shrink"] {
        cur = unit_from(bufs, name).forward_eval(&cur).unwrap();
    }
    for b in 0..num_blocks {
        let block_in = cur;
        let a = unit_from(bufs, &format!("block{b}.unit0")).forward_eval(&block_in).unwrap();
        let yl = unit_from(bufs, &format!("block{b}.unit1")).forward_eval(&a).unwrap();
        // Mirror the production operation order: a zero small-path output
        // still participates in both additions.
        let ys = Tensor4::zeros(yl.batch(), yl.channels(), yl.height(), yl.width()).unwrap();
        let body = ys.add(&yl).unwrap();
        cur = body.add(&block_in).unwrap();
    }
    cur = unit_from(bufs, "expand").forward_eval(&cur).unwrap();
    let recon = ReconLayer { op: ReconOp::Tconv, params: conv_params_from(bufs, "recon") };
    let r = recon.forward(&cur).unwrap();
    x0.add(&r).unwrap()
}

fn block_skip_reduction(config: NetConfig, seed: u64) {
    let num_blocks = config.num_blocks;
    let mut net: Network<f64> = Network::build(config, seed).unwrap();
    for b in 0..num_blocks {
        zero_buffers(&mut net, &format!("block{b}.unit2."));
        zero_buffers(&mut net, &format!("block{b}.unit3."));
    }
    let bufs = snapshot(&net);
    let mut rng = Lcg(seed.wrapping_mul(97) | 1);
    let mut x = Tensor4::<f64>::zeros(2, 1, 13, 11).unwrap();
    x.fill_with(|| rng.next());
    let full = net.infer(&x).unwrap();
    let reduced = reduced_forward(&bufs, &x, num_blocks);
    let identical = full
        .data()
        .iter()
        .zip(reduced.data())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    check(4, identical, "zeroed post-large composites did not reduce the block to its skips");
}

#[test]
fn acceptance_4_zeroed_residual_paths_collapse_to_the_skips() {
    // Full-size default network in single precision, plus the tiny
    // double-precision topology.
    identity_after_zeroed_recon::<f32>(NetConfig::default(), 5, 4);
    identity_after_zeroed_recon::<f64>(tiny_topology(), 6, 4);

    // Block reduction, with and without batch normalization, two blocks.
    let two_block = NetConfig {
        n_dense: 6,
        k_dense: 5,
        num_blocks: 2,
        block: RCBlockSpec { width: 4, k_large: 5, k_small: 3 },
        desk_scale: true,
        ..NetConfig::default()
    };
    block_skip_reduction(two_block.clone(), 8);
    block_skip_reduction(NetConfig { use_bn: false, ..two_block }, 9);

    pass(
        4,
        "zeroed reconstruction gives the bitwise identity (full f32 + tiny f64); zeroed post-large composites reduce blocks to their skips bitwise (with and without BN)",
    );
}

// ---------------------------------------------------------------------------
// Gate 5 — overfitting one fixed pair
// ---------------------------------------------------------------------------

struct OnePair {
    input: Tensor4<f64>,
    target: Tensor4<f64>,
}

impl BatchSource<f64> for OnePair {
    fn batch(&self, _: usize, _: u64, _: u64) -> rcnet_core::Result<(Tensor4<f64>, Tensor4<f64>)> {
        Ok((self.input.clone(), self.target.clone()))
    }
}

#[test]
fn acceptance_5_tiny_net_overfits_one_pair_a_hundredfold() {
    let started = Instant::now();
    let clean = synth_image(41, 41, 77);
    let noisy = add_gaussian_noise(&clean, 25.0, 78).unwrap();
    let source = OnePair {
        input: noisy.to_tensor::<f64>().unwrap(),
        target: clean.to_tensor::<f64>().unwrap(),
    };
    // Wider than the gradient-check topology: memorizing a 41x41 pair needs
    // clearly more parameters than pixels.
    let topology = NetConfig {
        n_dense: 24,
        block: RCBlockSpec { width: 12, ..tiny_topology().block },
        ..tiny_topology()
    };
    let mut net: Network<f64> = Network::build(topology, 7).unwrap();
    let hyper = SGDHyper {
        lr0: 0.05,
        momentum: 0.9,
        weight_decay: 0.0,
        lr_drop_every: u64::MAX,
        lr_drop_factor: 10.0,
        batch_size: 1,
        max_iters: 2000,
    };
    let log = train(&mut net, &source, None, &hyper, 0, 0, &mut NoHooks).unwrap();
    let first = log.entries.first().unwrap().train_loss;
    let last = log.entries.last().unwrap().train_loss;
    check(
        5,
        last < first / 100.0,
        &format!("loss only went {first:.6} -> {last:.6} over 2000 iterations"),
    );
    let secs = started.elapsed().as_secs_f64();
    check(5, secs < 300.0, &format!("overfit gate took {secs:.1} s (budget 300 s)"));
    pass(
        5,
        &format!(
            "one 41x41 pair: loss {first:.6} -> {last:.2e} ({:.0}x) in {secs:.1} s",
            first / last
        ),
    );
}

// ---------------------------------------------------------------------------
// Gate 6 — desk-scale denoising end to end
// ---------------------------------------------------------------------------

#[test]
fn acceptance_6_desk_denoising_beats_the_noisy_input_by_two_db() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let images = synth_dataset(17, 96, 96, 4242);
    let (train_manifest, val_manifest) = write_dataset(dir.path(), &images, 5);

    let mut cfg = RunConfig::load(preset("desk_denoise.cfg")).unwrap();
    // The preset must keep the published desk shape for this gate to mean
    // anything; a detuned preset is a failure, not a shortcut.
    check(6, cfg.task == Task::Denoise, "desk denoise preset changed task");
    check(6, cfg.model.num_blocks == 2, "desk denoise preset must keep 2 blocks");
    check(6, cfg.model.block.width == 16, "desk denoise preset must keep width 16");
    check(6, cfg.model.n_dense == 32, "desk denoise preset must keep 32 dense maps");
    check(6, cfg.model.desk_scale, "desk denoise preset must keep the desk-scale flag");
    check(6, cfg.sigma == 25.0, "desk denoise preset must keep sigma 25");
    check(6, cfg.optim.batch_size == 16, "desk denoise preset must keep batches of 16");
    check(6, cfg.optim.max_iters == 5000, "desk denoise preset must keep 5000 iterations");

    cfg.apply("data.train", train_manifest.to_str().unwrap()).unwrap();
    cfg.apply("data.val", val_manifest.to_str().unwrap()).unwrap();
    cfg.out_dir = dir.path().join("run").display().to_string();

    let report = cmd_train(cfg).unwrap();
    let eval = cmd_evaluate(
        &report.final_checkpoint,
        &val_manifest,
        &dir.path().join("eval"),
        None,
        false,
        None,
    )
    .unwrap();

    check(
        6,
        eval.restored.rows.len() >= 5,
        &format!("only {} held-out images scored", eval.restored.rows.len()),
    );
    let noisy_psnr = eval.input.mean_psnr();
    let restored_psnr = eval.restored.mean_psnr();
    let gain = restored_psnr - noisy_psnr;
    check(
        6,
        gain >= 2.0,
        &format!("mean PSNR gain {gain:.2} dB ({noisy_psnr:.2} -> {restored_psnr:.2}), floor 2.0 dB"),
    );
    let noisy_ssim = eval.input.mean_ssim();
    let restored_ssim = eval.restored.mean_ssim();
    check(
        6,
        restored_ssim > noisy_ssim,
        &format!("mean SSIM did not improve: {noisy_ssim:.4} -> {restored_ssim:.4}"),
    );
    let mins = started.elapsed().as_secs_f64() / 60.0;
    check(6, mins <= 30.0, &format!("desk denoise gate took {mins:.1} min (budget 30)"));
    pass(
        6,
        &format!(
            "{} held-out images: PSNR {noisy_psnr:.2} -> {restored_psnr:.2} dB ({gain:+.2} dB), SSIM {noisy_ssim:.4} -> {restored_ssim:.4}, {mins:.1} min",
            eval.restored.rows.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// Gate 7 — training-stability comparison harness
// ---------------------------------------------------------------------------

#[test]
fn acceptance_7_stability_harness_emits_comparable_variance_series() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let images = synth_dataset(10, 72, 72, 31337);
    let (train_manifest, val_manifest) = write_dataset(dir.path(), &images, 2);

    let mut cfg = RunConfig::load(preset("desk_stability.cfg")).unwrap();
    check(7, cfg.optim.max_iters == 600, "stability preset must keep its 600-iteration budget");
    check(7, cfg.val_every == 10, "stability preset must keep val_every 10");
    cfg.apply("data.train", train_manifest.to_str().unwrap()).unwrap();
    cfg.apply("data.val", val_manifest.to_str().unwrap()).unwrap();
    cfg.out_dir = dir.path().join("stab").display().to_string();

    let window = 5usize;
    let variants = [Variant::Rcnet, Variant::Win, Variant::NoDense2];
    let outcome = cmd_stability(cfg, window, &variants).unwrap();

    check(7, outcome.runs.len() == 3, "expected one run per variant");
    let points = 600 / 10;
    let expected_rows = points - window + 1;
    let csv = std::fs::read_to_string(&outcome.stability_csv).unwrap();
    let mut lines = csv.lines();
    check(
        7,
        lines.next() == Some("iter,rcnet,win,no_dense2"),
        "stability CSV header changed",
    );
    let mut rows = 0usize;
    let mut prev_iter = -1i64;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        check(7, fields.len() == 4, &format!("malformed stability row: {}", line.trim()));
        let it: i64 = fields[0].parse().unwrap();
        check(7, it > prev_iter, "stability rows not in iteration order");
        prev_iter = it;
        for f in &fields[1..] {
            let v: f64 = f.parse().unwrap();
            check(7, v.is_finite() && v >= 0.0, &format!("bad rolling-std value {f}"));
        }
        rows += 1;
    }
    check(
        7,
        rows == expected_rows,
        &format!("stability CSV has {rows} rows, expected {expected_rows}"),
    );

    let parent = outcome.stability_csv.parent().unwrap();
    let mut stds = Vec::new();
    for (name, log, rolling) in &outcome.runs {
        let loss_csv = parent.join(format!("loss_{name}.csv"));
        check(7, loss_csv.is_file(), &format!("missing {}", loss_csv.display()));
        check(7, log.entries.len() == 600, &format!("{name} log has {} entries", log.entries.len()));
        check(7, rolling.len() == expected_rows, &format!("{name} rolling series length"));
        let mean = rolling.iter().sum::<f64>() / rolling.len() as f64;
        stds.push((name.clone(), mean));
    }

    println!("stability summary:\n{}", outcome.summary);
    let mins = started.elapsed().as_secs_f64() / 60.0;
    let detail: Vec<String> =
        stds.iter().map(|(n, m)| format!("{n} mean rolling std {m:.2e}")).collect();
    pass(
        7,
        &format!(
            "{rows} aligned rows over 3 variants in {mins:.1} min; {} (comparison reported, not asserted)",
            detail.join(", ")
        ),
    );
}

// ---------------------------------------------------------------------------
// Gate 8 — batch-normalization ablation on desk super-resolution
// ---------------------------------------------------------------------------

fn all_losses_finite(log: &TrainLog) -> bool {
    log.entries.iter().all(|e| {
        e.train_loss.is_finite()
            && e.val_loss.map_or(true, f64::is_finite)
            && e.val_psnr.map_or(true, f64::is_finite)
    })
}

#[test]
fn acceptance_8_batch_norm_ablation_trains_and_beats_bicubic() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let images = textured_dataset(15, 96, 96, 808);
    let (train_manifest, val_manifest) = write_dataset(dir.path(), &images, 5);

    let mut base = RunConfig::load(preset("desk_sr.cfg")).unwrap();
    check(8, base.task == Task::Sr, "desk SR preset changed task");
    check(8, base.sr_factor == 2, "desk SR preset must keep the x2 factor");
    check(8, base.model.use_bn, "desk SR preset must default to BN on");
    base.apply("data.train", train_manifest.to_str().unwrap()).unwrap();
    base.apply("data.val", val_manifest.to_str().unwrap()).unwrap();

    let mut with_bn = base.clone();
    with_bn.out_dir = dir.path().join("with_bn").display().to_string();
    let mut without_bn = base;
    without_bn.apply("model.use_bn", "false").unwrap();
    without_bn.out_dir = dir.path().join("without_bn").display().to_string();

    let report_bn = cmd_train_quiet(with_bn).unwrap();
    check(8, all_losses_finite(&report_bn.log), "BN run produced a non-finite loss");
    println!(
        "BN run done: final loss {:.6}, last val psnr {:?}",
        report_bn.log.entries.last().unwrap().train_loss,
        report_bn.log.entries.iter().rev().find_map(|e| e.val_psnr)
    );
    let report_free = cmd_train_quiet(without_bn).unwrap();
    check(8, all_losses_finite(&report_free.log), "BN-free run produced a non-finite loss");
    println!(
        "BN-free run done: final loss {:.6}, last val psnr {:?}",
        report_free.log.entries.last().unwrap().train_loss,
        report_free.log.entries.iter().rev().find_map(|e| e.val_psnr)
    );

    let eval_bn = cmd_evaluate(
        &report_bn.final_checkpoint,
        &val_manifest,
        &dir.path().join("eval_bn"),
        None,
        false,
        None,
    )
    .unwrap();
    let eval_free = cmd_evaluate(
        &report_free.final_checkpoint,
        &val_manifest,
        &dir.path().join("eval_free"),
        None,
        false,
        None,
    )
    .unwrap();

    // Paired report; the shared input row is the bicubic x2 baseline both
    // variants must beat.
    let bicubic_psnr = eval_bn.input.mean_psnr();
    let bicubic_ssim = eval_bn.input.mean_ssim();
    println!("| configuration | PSNR (dB) | SSIM |");
    println!("|---|---|---|");
    println!("| bicubic x2 input | {bicubic_psnr:.4} | {bicubic_ssim:.6} |");
    println!(
        "| rcnet with BN | {:.4} | {:.6} |",
        eval_bn.restored.mean_psnr(),
        eval_bn.restored.mean_ssim()
    );
    println!(
        "| rcnet without BN | {:.4} | {:.6} |",
        eval_free.restored.mean_psnr(),
        eval_free.restored.mean_ssim()
    );

    let gain_bn = eval_bn.restored.mean_psnr() - bicubic_psnr;
    let gain_free = eval_free.restored.mean_psnr() - bicubic_psnr;
    check(
        8,
        gain_bn > 0.0,
        &format!("BN run did not beat bicubic: {gain_bn:+.3} dB vs {bicubic_psnr:.2} dB baseline"),
    );
    check(
        8,
        gain_free > 0.0,
        &format!(
            "BN-free run did not beat bicubic: {gain_free:+.3} dB vs {bicubic_psnr:.2} dB baseline"
        ),
    );
    let mins = started.elapsed().as_secs_f64() / 60.0;
    pass(
        8,
        &format!(
            "x2 SR over bicubic {bicubic_psnr:.2} dB: with BN {gain_bn:+.2} dB, without BN {gain_free:+.2} dB, both finite, {mins:.1} min"
        ),
    );
}

// ---------------------------------------------------------------------------
// Gate 9 — metric closed forms and bitwise round trips
// ---------------------------------------------------------------------------

#[test]
fn acceptance_9_metric_closed_forms_and_round_trips_are_exact() {
    // PSNR of a uniform +10 offset: mse = 100, so 10*log10(255^2/100).
    let a = GrayImage::from_pixels(16, 16, vec![100.0; 256]).unwrap();
    let b = GrayImage::from_pixels(16, 16, vec![110.0; 256]).unwrap();
    let p = psnr(&a, &b, 255.0).unwrap();
    check(9, (p - 28.1308).abs() < 1e-3, &format!("uniform-offset PSNR {p}"));
    check(9, psnr(&a, &a, 255.0).unwrap().is_infinite(), "identical images must score infinite");

    // SSIM closed form for a constant pair: variance terms vanish, leaving
    // the luminance factor (2*mu1*mu2 + c1) / (mu1^2 + mu2^2 + c1).
    check(9, ssim(&a, &a).unwrap() == 1.0, "self-similarity must be exactly 1");
    let s = ssim(&a, &b).unwrap();
    let c1 = (0.01f64 * 255.0).powi(2);
    let expect = (2.0 * 100.0 * 110.0 + c1) / (100.0f64.powi(2) + 110.0f64.powi(2) + c1);
    check(9, (s - expect).abs() < 1e-3, &format!("constant-pair SSIM {s} vs closed form {expect}"));

    // Config round trip: serialize/parse is a fixed point on every shipped
    // preset, and floating-point fields survive bitwise.
    for name in ["desk_denoise.cfg", "desk_sr.cfg", "desk_stability.cfg"] {
        let loaded = RunConfig::load(preset(name)).unwrap();
        let once = loaded.serialize();
        let twice = RunConfig::parse(&once).unwrap().serialize();
        check(9, once == twice, &format!("serialize/parse not a fixed point for {name}"));
    }
    let mut gnarly = RunConfig::default();
    gnarly.sigma = 0.1 + 0.2; // 0.30000000000000004
    gnarly.optim.lr0 = 1.0 / 3.0;
    let back = RunConfig::parse(&gnarly.serialize()).unwrap();
    check(9, back.sigma.to_bits() == gnarly.sigma.to_bits(), "sigma did not survive bitwise");
    check(9, back.optim.lr0.to_bits() == gnarly.optim.lr0.to_bits(), "lr0 did not survive bitwise");

    // Checkpoint round trip: save -> load -> rebuild -> re-encode is
    // byte-identical, and the rebuilt network matches buffer for buffer.
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.model = tiny_topology();
    let net: Network<f32> = Network::build(cfg.model.clone(), 21).unwrap();
    let velocities: Vec<Vec<f32>> = {
        let mut v = Vec::new();
        net.visit_params(&mut |_, data| {
            v.push((0..data.len()).map(|i| (i as f32) * 0.5 - 1.0).collect())
        });
        v
    };
    let path = dir.path().join("net.rcn");
    checkpoint::save(&path, &cfg, &net, 777, Some(&velocities)).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let raw = checkpoint::load(&path).unwrap();
    check(9, raw.iteration == 777, "iteration did not round-trip");
    let rebuilt: Network<f32> = raw.instantiate(&path).unwrap();
    let mut original = Vec::new();
    net.visit_buffers(&mut |name, _, _, data| {
        original.push((name.to_string(), data.iter().map(|v| v.to_bits()).collect::<Vec<_>>()))
    });
    let mut restored = Vec::new();
    rebuilt.visit_buffers(&mut |name, _, _, data| {
        restored.push((name.to_string(), data.iter().map(|v| v.to_bits()).collect::<Vec<_>>()))
    });
    check(9, original == restored, "rebuilt network differs from the saved one");
    let vels_back = raw.velocities::<f32>(&path).unwrap().unwrap();
    check(9, vels_back == velocities, "velocities did not round-trip");
    let re_encoded = checkpoint::encode(&raw.config, &rebuilt, raw.iteration, Some(&vels_back));
    check(9, re_encoded == bytes, "re-encoded checkpoint is not byte-identical");

    // Same config + same seed => bitwise-identical training, including the
    // logged losses, at the default single-thread setting.
    check(
        9,
        rcnet_core::threads::thread_count() == 1,
        "determinism gate expects the single-thread default",
    );
    let images = synth_dataset(5, 32, 32, 99);
    let (train_manifest, val_manifest) = write_dataset(dir.path(), &images, 2);
    let mut run_cfg = RunConfig::default();
    run_cfg.apply("model.n_dense", "5").unwrap();
    run_cfg.apply("model.k_dense", "3").unwrap();
    run_cfg.apply("model.num_blocks", "1").unwrap();
    run_cfg.apply("model.width", "3").unwrap();
    run_cfg.apply("model.k_large", "3").unwrap();
    run_cfg.apply("model.k_small", "1").unwrap();
    run_cfg.apply("model.desk_scale", "true").unwrap();
    run_cfg.apply("optim.lr0", "0.01").unwrap();
    run_cfg.apply("optim.batch_size", "4").unwrap();
    run_cfg.apply("optim.max_iters", "10").unwrap();
    run_cfg.apply("data.patch_size", "12").unwrap();
    run_cfg.apply("data.stride", "7").unwrap();
    run_cfg.apply("val_every", "5").unwrap();
    run_cfg.apply("log_every", "0").unwrap();
    run_cfg.seed = 13;
    run_cfg.train_manifest = Some(train_manifest.display().to_string());
    run_cfg.val_manifest = Some(val_manifest.display().to_string());
    run_cfg.out_dir = dir.path().join("first").display().to_string();
    let first = cmd_train_quiet(run_cfg.clone()).unwrap();
    run_cfg.out_dir = dir.path().join("second").display().to_string();
    let second = cmd_train_quiet(run_cfg).unwrap();
    let raw1 = checkpoint::load(&first.final_checkpoint).unwrap();
    let raw2 = checkpoint::load(&second.final_checkpoint).unwrap();
    check(9, raw1.iteration == raw2.iteration, "reruns stopped at different iterations");
    check(9, raw1.buffers.len() == raw2.buffers.len(), "reruns saved different buffer sets");
    for (x, y) in raw1.buffers.iter().zip(&raw2.buffers) {
        check(9, x.name == y.name, &format!("buffer order diverged at {} vs {}", x.name, y.name));
        check(9, x.bytes == y.bytes, &format!("buffer {} differs between identical runs", x.name));
    }
    check(
        9,
        std::fs::read(&first.log_csv).unwrap() == std::fs::read(&second.log_csv).unwrap(),
        "training logs differ between identical runs",
    );

    pass(
        9,
        &format!(
            "PSNR {p:.4} dB and SSIM {s:.6} match closed forms; presets, checkpoints, and same-seed training all round-trip bitwise"
        ),
    );
}
