//! Structure inspection: print the layer table and parameter count of a
//! configured or checkpointed network.

use std::fmt::Write as _;
use std::path::PathBuf;

use rcnet_core::model::Network;
use rcnet_core::Precision;

use crate::checkpoint;
use crate::config::RunConfig;
use crate::error::{Error, Result};

pub enum InspectSource {
    Config(PathBuf),
    Checkpoint(PathBuf),
}

pub fn cmd_inspect(source: InspectSource, show_config: bool) -> Result<String> {
    let mut out = String::new();
    let (cfg, header) = match source {
        InspectSource::Config(path) => {
            let cfg = RunConfig::load(&path)?;
            cfg.validate()?;
            (cfg, format!("config {}", path.display()))
        }
        InspectSource::Checkpoint(path) => {
            let raw = checkpoint::load(&path)?;
            let header = format!(
                "checkpoint {} (iteration {}, {} precision)",
                path.display(),
                raw.iteration,
                raw.precision()
            );
            (raw.config, header)
        }
    };
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "task: {}, seed: {}", cfg.task.as_str(), cfg.seed);
    if show_config {
        let _ = writeln!(out);
        out.push_str(&cfg.serialize());
    }
    let _ = writeln!(out);
    // The table depends only on shapes, so build at the cheaper width.
    let table = match cfg.precision {
        Precision::Single => Network::<f32>::build(cfg.model.clone(), cfg.seed)?.summary_table(),
        Precision::Double => Network::<f64>::build(cfg.model.clone(), cfg.seed)?.summary_table(),
    };
    out.push_str(&table);
    Ok(out)
}

/// Resolve the exactly-one-of argument pair for `inspect`.
pub fn inspect_source(
    config: Option<PathBuf>,
    ckpt: Option<PathBuf>,
) -> Result<InspectSource> {
    match (config, ckpt) {
        (Some(c), None) => Ok(InspectSource::Config(c)),
        (None, Some(k)) => Ok(InspectSource::Checkpoint(k)),
        _ => Err(Error::Usage(
            "inspect needs exactly one of --config or --checkpoint".into(),
        )),
    }
}
