//! The training command: data preparation, the optimization loop with
//! progress lines and periodic checkpoints, and the final artifacts
//! (checkpoint + loss CSV).

use std::path::{Path, PathBuf};

use rcnet_core::data::PatchSource;
use rcnet_core::model::Network;
use rcnet_core::optim::{train, LogEntry, SgdState, TrainHooks, TrainLog};
use rcnet_core::{Precision, Scalar};

use crate::checkpoint;
use crate::commands::common::{ensure_out_dir, load_named_images, make_val_pair};
use crate::config::RunConfig;
use crate::error::{Error, Result};

/// What a completed training run produced.
#[derive(Debug)]
pub struct TrainReport {
    pub log: TrainLog,
    pub final_checkpoint: PathBuf,
    pub log_csv: PathBuf,
}

struct RunHooks<'a, S: Scalar> {
    cfg: &'a RunConfig,
    out_dir: &'a Path,
    /// Velocities captured at the last step, for the final checkpoint.
    last_velocities: Option<Vec<Vec<S>>>,
    quiet: bool,
}

impl<S: Scalar> TrainHooks<S> for RunHooks<'_, S> {
    fn on_step(
        &mut self,
        net: &Network<S>,
        state: &SgdState<S>,
        entry: &LogEntry,
    ) -> rcnet_core::Result<()> {
        if !self.quiet && self.cfg.log_every > 0 && state.iter % self.cfg.log_every == 0 {
            let mut line = format!(
                "iter={} lr={} loss={:.6}",
                entry.iter, entry.lr, entry.train_loss
            );
            if let Some(v) = entry.val_loss {
                line.push_str(&format!(" val_loss={v:.6}"));
            }
            if let Some(p) = entry.val_psnr {
                line.push_str(&format!(" val_psnr={p:.2}"));
            }
            println!("{line}");
        }
        if self.cfg.checkpoint_every > 0 && state.iter % self.cfg.checkpoint_every == 0 {
            let path = self.out_dir.join(format!("checkpoint_{:07}.rcn", state.iter));
            // The hook runs inside the engine, so file failures surface
            // through the engine's path-plus-reason error form.
            checkpoint::save(&path, self.cfg, net, state.iter, Some(&state.velocities)).map_err(
                |e| rcnet_core::Error::ImageFormat {
                    path: path.display().to_string(),
                    reason: match e {
                        Error::Io { source, .. } => source.to_string(),
                        other => other.to_string(),
                    },
                },
            )?;
        }
        if state.iter == self.cfg.optim.max_iters {
            self.last_velocities = Some(state.velocities.clone());
        }
        Ok(())
    }
}

pub fn cmd_train(cfg: RunConfig) -> Result<TrainReport> {
    cmd_train_impl(cfg, false)
}

/// Like [`cmd_train`] but without progress lines; the experiment harnesses
/// use this to keep multi-run output readable.
pub fn cmd_train_quiet(cfg: RunConfig) -> Result<TrainReport> {
    cmd_train_impl(cfg, true)
}

fn cmd_train_impl(cfg: RunConfig, quiet: bool) -> Result<TrainReport> {
    cfg.validate()?;
    let manifest = cfg
        .train_manifest
        .clone()
        .ok_or_else(|| Error::Config("data.train manifest is required to train".into()))?;
    let out_dir = PathBuf::from(&cfg.out_dir);
    ensure_out_dir(&out_dir)?;

    let images: Vec<_> = load_named_images(&manifest)?
        .into_iter()
        .map(|(_, img)| img)
        .collect();
    let source = PatchSource::prepare(
        &images,
        &cfg.corruption(),
        cfg.patch_size,
        cfg.stride,
        cfg.seed,
    )?;
    if !quiet {
        println!(
            "training {} ({}): {} images, {} patches, {} iterations",
            cfg.model.kind.as_str(),
            cfg.precision,
            images.len(),
            source.total_patches(),
            cfg.optim.max_iters
        );
    }

    match cfg.precision {
        Precision::Single => run::<f32>(cfg, source, out_dir, quiet),
        Precision::Double => run::<f64>(cfg, source, out_dir, quiet),
    }
}

fn run<S: Scalar>(
    cfg: RunConfig,
    source: PatchSource,
    out_dir: PathBuf,
    quiet: bool,
) -> Result<TrainReport> {
    let val = if cfg.val_every > 0 { make_val_pair::<S>(&cfg)? } else { None };
    let mut net: Network<S> = Network::build(cfg.model.clone(), cfg.seed)?;
    let mut hooks = RunHooks { cfg: &cfg, out_dir: &out_dir, last_velocities: None, quiet };
    let log = train(&mut net, &source, val.as_ref(), &cfg.optim, cfg.seed, cfg.val_every, &mut hooks)?;
    let last_velocities = hooks.last_velocities.take();

    let final_checkpoint = out_dir.join("final.rcn");
    checkpoint::save(
        &final_checkpoint,
        &cfg,
        &net,
        cfg.optim.max_iters,
        last_velocities.as_deref(),
    )?;

    let log_csv = out_dir.join("train_log.csv");
    std::fs::write(&log_csv, log.to_csv()).map_err(|e| Error::io(&log_csv, e))?;

    if !quiet {
        if let Some(e) = log.entries.last() {
            println!("done: final loss {:.6} at iter {}", e.train_loss, e.iter);
        }
        println!("wrote {} and {}", final_checkpoint.display(), log_csv.display());
    }
    Ok(TrainReport { log, final_checkpoint, log_csv })
}
