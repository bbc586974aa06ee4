//! `rcnet` — train and apply convolutional restoration networks.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use rcnet_cli::commands::{
    cmd_denoise, cmd_evaluate, cmd_inspect, cmd_stability, cmd_superres, cmd_train,
    inspect_source, Variant,
};
use rcnet_cli::config::RunConfig;
use rcnet_cli::error::{Error, Result};

#[derive(Parser)]
#[command(
    name = "rcnet",
    about = "Train and apply regulated convolutional networks for image denoising and super-resolution",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags shared by every config-driven command. Precedence: flag > file.
#[derive(Args)]
struct ConfigArgs {
    /// Run configuration file (key = value lines)
    #[arg(long)]
    config: PathBuf,
    /// Override a config key, e.g. --set optim.lr0=0.01 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Override the run seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the iteration count
    #[arg(long)]
    iters: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        for pair in &self.set {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                Error::Usage(format!("--set expects KEY=VALUE, got '{pair}'"))
            })?;
            cfg.apply(key.trim(), value.trim())?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.display().to_string();
        }
        if let Some(iters) = self.iters {
            cfg.optim.max_iters = iters;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a network from a run configuration
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Denoise images with a trained checkpoint
    Denoise {
        /// Trained checkpoint (.rcn)
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output directory
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Treat inputs as clean and add this much noise first
        #[arg(long)]
        sigma: Option<f64>,
        /// Seed for --sigma corruption (default: the checkpoint's seed)
        #[arg(long)]
        seed: Option<u64>,
        /// Images to process
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Super-resolve images with a trained checkpoint
    Superres {
        /// Trained checkpoint (.rcn)
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output directory
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Scale factor (default: the checkpoint's)
        #[arg(long)]
        factor: Option<usize>,
        /// Treat inputs as clean ground truth and degrade them first
        #[arg(long)]
        corrupt: bool,
        /// Images to process
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Score a checkpoint on a manifest of clean held-out images
    Evaluate {
        /// Trained checkpoint (.rcn)
        #[arg(long)]
        checkpoint: PathBuf,
        /// Manifest of clean images
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory for the CSV reports
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Corruption seed (default: the checkpoint's seed)
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the input/restored images
        #[arg(long)]
        save_images: bool,
        /// Evaluate only the first N images
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Print the layer table and parameter count of a config or checkpoint
    Inspect {
        /// Run configuration file
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoint file
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also print the full (embedded) configuration
        #[arg(long)]
        show_config: bool,
    },
    /// Train architecture variants on one data stream and compare stability
    Stability {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Rolling-std window over the validation-loss series
        #[arg(long, default_value_t = 5)]
        window: usize,
        /// Comma-separated variants: rcnet, win, no_dense2
        #[arg(long, default_value = "rcnet,win,no_dense2")]
        variants: String,
    },
}

fn run() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Train { cfg } => {
            cmd_train(cfg.resolve()?)?;
        }
        Cmd::Denoise { checkpoint, out, sigma, seed, inputs } => {
            cmd_denoise(&checkpoint, &inputs, &out, sigma, seed)?;
        }
        Cmd::Superres { checkpoint, out, factor, corrupt, inputs } => {
            cmd_superres(&checkpoint, &inputs, &out, factor, corrupt)?;
        }
        Cmd::Evaluate { checkpoint, manifest, out, seed, save_images, limit } => {
            cmd_evaluate(&checkpoint, &manifest, &out, seed, save_images, limit)?;
        }
        Cmd::Inspect { config, checkpoint, show_config } => {
            let report = cmd_inspect(inspect_source(config, checkpoint)?, show_config)?;
            print!("{report}");
        }
        Cmd::Stability { cfg, window, variants } => {
            let variants = Variant::parse_list(&variants)?;
            cmd_stability(cfg.resolve()?, window, &variants)?;
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
