//! Shared fixtures for the criterion benchmarks: deterministic tensors and
//! the desk-scale network the benches exercise.

use rcnet_core::model::{NetConfig, NetKind, Network, RCBlockSpec};
use rcnet_core::{Scalar, Tensor4};

/// Deterministic pseudo-random fill in [-1, 1); no RNG dependency needed
/// for benchmark inputs.
pub fn random_tensor<S: Scalar>(n: usize, c: usize, h: usize, w: usize, seed: u64) -> Tensor4<S> {
    let mut t = Tensor4::zeros(n, c, h, w).expect("bench tensor dims");
    let mut s = seed | 1;
    t.fill_with(|| {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    });
    t
}

/// The two-block desk-scale configuration the presets train.
pub fn desk_config() -> NetConfig {
    NetConfig {
        kind: NetKind::RcNet,
        n_dense: 32,
        k_dense: 5,
        num_blocks: 2,
        block: RCBlockSpec { width: 16, k_large: 5, k_small: 3 },
        desk_scale: true,
        ..NetConfig::default()
    }
}

pub fn desk_net<S: Scalar>() -> Network<S> {
    Network::build(desk_config(), 7).expect("desk config builds")
}
