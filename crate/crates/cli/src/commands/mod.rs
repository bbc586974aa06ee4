//! The command implementations behind the binary's subcommands. Each takes
//! plain typed arguments and returns its artifacts, so integration tests
//! drive them directly without a shell.

pub mod common;
pub mod evaluate;
pub mod inspect;
pub mod restore;
pub mod stability;
pub mod train;

pub use evaluate::{cmd_evaluate, EvalOutcome};
pub use inspect::{cmd_inspect, inspect_source, InspectSource};
pub use restore::{cmd_denoise, cmd_superres, RestoreOutcome};
pub use stability::{cmd_stability, StabilityOutcome, Variant};
pub use train::{cmd_train, cmd_train_quiet, TrainReport};
