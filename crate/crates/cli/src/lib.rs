//! Library face of the command-line tool: run configuration, checkpoint
//! serialization, and the command implementations. The binary in
//! `main.rs` is a thin argument-parsing shell over these.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;

pub use config::{RunConfig, Task};
pub use error::{Error, Result};
