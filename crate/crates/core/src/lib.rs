//! Training and inference engine for a regulated residual convolutional
//! network aimed at image restoration (denoising and single-image
//! super-resolution), plus the wide shallow baseline it is measured against.
//!
//! Everything runs on the CPU with reproducible arithmetic: the same seed,
//! inputs, and precision give bitwise-identical parameters and outputs
//! regardless of the configured worker-thread count.

pub mod error;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod scalar;
pub mod tensor;
pub mod threads;

pub mod data;

#[cfg(feature = "reference")]
pub mod reference;

pub use error::{Error, Result};
pub use scalar::{Precision, Scalar};
pub use tensor::Tensor4;
