//! Image I/O, patch extraction and augmentation, Gaussian corruption, and
//! bicubic LR/HR pair synthesis.

mod image;
mod noise;
mod patch;
mod resize;
mod source;

pub use image::{load_image, save_image, GrayImage};
pub use noise::add_gaussian_noise;
pub use patch::{augment, extract_patches};
pub use resize::{bicubic_resize, make_sr_pair};
pub use source::{load_manifest, CorruptionSpec, PatchSource};
