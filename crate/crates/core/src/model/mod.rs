//! Network assembly: configuration, composite building blocks, and the full
//! residual topology.

mod config;
mod network;
mod unit;

pub use config::{CompositeSpec, NetConfig, NetKind, RCBlockSpec};
pub use network::{BufKind, LayerRow, Mode, NetGrads, Network};
pub use unit::{CompositeUnit, ReconLayer, ReconOp, UnitCache, UnitGrads};
