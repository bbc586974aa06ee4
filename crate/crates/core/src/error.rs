//! Crate-wide error type.
//!
//! Shape and configuration problems are reported through [`Error`] rather than
//! panics so the CLI can surface them as one-line diagnostics. Hot loops still
//! use `debug_assert!` for contracts that construction has already validated.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: String, right: String },

    #[error("channel mismatch: input has {input} channels, layer expects {expected}")]
    ChannelMismatch { input: usize, expected: usize },

    #[error("kernel size must be odd and non-zero, got {0}")]
    BadKernel(usize),

    #[error("tensor dims must all be >= 1, got {0}x{1}x{2}x{3}")]
    EmptyDim(usize, usize, usize, usize),

    #[error("tensor of {0}x{1}x{2}x{3} elements overflows the flat buffer size")]
    SizeOverflow(usize, usize, usize, usize),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("batch statistics are undefined over a single value per channel")]
    DegenerateBatch,

    #[error("backward called without a cached forward pass")]
    MissingCache,

    #[error(
        "training aborted: loss is not finite at iteration {iter} (lr={lr}); \
         recent losses: {tail:?}"
    )]
    NonFiniteLoss { iter: u64, lr: f64, tail: Vec<f64> },

    #[error("dataset is empty: {0}")]
    EmptyDataset(String),

    #[error("{path}: {reason}")]
    ImageFormat { path: String, reason: String },

    #[error("image is {h}x{w} but the operation needs at least {need}x{need}")]
    ImageTooSmall { h: usize, w: usize, need: usize },

    #[error("rolling window {window} is invalid for a series of length {len}")]
    BadWindow { window: usize, len: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Helper for the common two-shape mismatch case.
    pub fn shapes(left: impl std::fmt::Debug, right: impl std::fmt::Debug) -> Self {
        Error::ShapeMismatch {
            left: format!("{left:?}"),
            right: format!("{right:?}"),
        }
    }
}
