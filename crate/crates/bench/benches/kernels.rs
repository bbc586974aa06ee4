//! Benchmarks for the hot paths: convolution kernels, whole-network
//! passes, the resampler, and the quality metrics.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use rcnet_bench::{desk_net, random_tensor};
use rcnet_core::data::{bicubic_resize, GrayImage};
use rcnet_core::layers::{conv_backward, conv_forward, tconv_forward, ConvParams};
use rcnet_core::metrics::{psnr, ssim};
use rcnet_core::model::{Mode, Network};

fn conv_params(out_c: usize, in_c: usize, k: usize, seed: u64) -> ConvParams<f32> {
    ConvParams { weights: random_tensor(out_c, in_c, k, k, seed), bias: Some(vec![0.01; out_c]) }
}

fn bench_conv(c: &mut Criterion) {
    let x = random_tensor::<f32>(16, 16, 25, 25, 11);
    let p = conv_params(16, 16, 5, 13);
    c.bench_function("conv_forward 16x16x25x25 k5", |b| {
        b.iter(|| conv_forward(black_box(&x), black_box(&p)).unwrap())
    });

    let grad = random_tensor::<f32>(16, 16, 25, 25, 17);
    c.bench_function("conv_backward 16x16x25x25 k5", |b| {
        b.iter(|| conv_backward(black_box(&x), black_box(&p), black_box(&grad)).unwrap())
    });

    // Transposed-conv weights are (in, out, k, k); bias follows the output.
    let pt = ConvParams { weights: random_tensor::<f32>(16, 1, 3, 3, 19), bias: Some(vec![0.01]) };
    c.bench_function("tconv_forward 16->1 k3", |b| {
        b.iter(|| tconv_forward(black_box(&x), black_box(&pt)).unwrap())
    });
}

fn bench_network(c: &mut Criterion) {
    let net: Network<f32> = desk_net();
    let img = random_tensor::<f32>(1, 1, 96, 96, 23);
    c.bench_function("desk net infer 96x96", |b| {
        b.iter(|| net.infer(black_box(&img)).unwrap())
    });

    let mut train_net: Network<f32> = desk_net();
    train_net.set_mode(Mode::Train);
    let batch = random_tensor::<f32>(16, 1, 25, 25, 29);
    let grad = random_tensor::<f32>(16, 1, 25, 25, 31);
    c.bench_function("desk net train step 16x25x25", |b| {
        b.iter(|| {
            let y = train_net.forward(black_box(&batch)).unwrap();
            let g = train_net.backward(black_box(&grad)).unwrap();
            black_box((y, g));
        })
    });
}

fn bench_pipeline(c: &mut Criterion) {
    let mut s = 5u64;
    let px: Vec<f64> = (0..96 * 96)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            (s >> 56) as f64
        })
        .collect();
    let img = GrayImage::from_pixels(96, 96, px).unwrap();

    c.bench_function("bicubic 96->192", |b| {
        b.iter(|| bicubic_resize(black_box(&img), 192, 192).unwrap())
    });

    let shifted = {
        let mut p = img.pixels().to_vec();
        for v in &mut p {
            *v = (*v + 4.0).min(255.0);
        }
        GrayImage::from_pixels(96, 96, p).unwrap()
    };
    c.bench_function("ssim 96x96", |b| {
        b.iter(|| ssim(black_box(&img), black_box(&shifted)).unwrap())
    });
    c.bench_function("psnr 96x96", |b| {
        b.iter(|| psnr(black_box(&img), black_box(&shifted), 255.0).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bench_conv, bench_network, bench_pipeline
}
criterion_main!(benches);
