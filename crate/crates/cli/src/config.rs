//! Run configuration: a flat `key = value` text format with `#` comments
//! and dotted section prefixes (`model.`, `optim.`, `data.`).
//!
//! Parsing starts from defaults and applies lines in order, so a config
//! file may be sparse; `serialize` always emits every key in one canonical
//! order, which makes parse → serialize a fixed point and lets checkpoints
//! embed an exact, diffable record of their run.

use std::fmt::Write as _;
use std::path::Path;

use rcnet_core::data::CorruptionSpec;
use rcnet_core::model::{NetConfig, NetKind};
use rcnet_core::optim::SGDHyper;
use rcnet_core::Precision;

use crate::error::{Error, Result};

/// What the network is being trained or used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Remove additive Gaussian noise of a known sigma.
    Denoise,
    /// Sharpen a bicubic-upscaled image at one fixed scale factor.
    Sr,
    /// One network across several scale factors.
    SrBlind,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Denoise => "denoise",
            Task::Sr => "sr",
            Task::SrBlind => "sr_blind",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "denoise" => Ok(Task::Denoise),
            "sr" => Ok(Task::Sr),
            "sr_blind" => Ok(Task::SrBlind),
            other => Err(Error::Config(format!(
                "unknown task '{other}' (expected denoise, sr, or sr_blind)"
            ))),
        }
    }
}

/// Everything one run needs: task, architecture, optimizer, data pipeline,
/// and bookkeeping. All fields have defaults; config files override them.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub precision: Precision,
    pub seed: u64,
    pub out_dir: String,
    /// Steps between checkpoint files; 0 disables periodic checkpoints.
    pub checkpoint_every: u64,
    /// Steps between validation passes; 0 disables them.
    pub val_every: u64,
    /// Steps between progress lines; 0 prints none.
    pub log_every: u64,
    pub model: NetConfig,
    pub optim: SGDHyper,
    /// Noise level for the denoise task (on the 0–255 pixel scale).
    pub sigma: f64,
    /// Scale factor for the sr task.
    pub sr_factor: usize,
    /// Scale factors pooled by the sr_blind task.
    pub sr_factors: Vec<usize>,
    pub patch_size: usize,
    pub stride: usize,
    /// Manifest of training images (one path per line, relative to the
    /// manifest's directory).
    pub train_manifest: Option<String>,
    /// Manifest of validation / held-out images.
    pub val_manifest: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::Denoise,
            precision: Precision::Single,
            seed: 1,
            out_dir: "out".into(),
            checkpoint_every: 0,
            val_every: 100,
            log_every: 100,
            model: NetConfig::default(),
            optim: SGDHyper::default(),
            sigma: 25.0,
            sr_factor: 2,
            sr_factors: vec![2, 3, 4],
            patch_size: 41,
            stride: 21,
            train_manifest: None,
            val_manifest: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("key '{key}': cannot parse '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("key '{key}': expected true or false, got '{value}'"))),
    }
}

impl RunConfig {
    /// Apply one `key = value` assignment. Used for config lines and for
    /// `--set` command-line overrides alike.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "task" => self.task = Task::parse(value)?,
            "precision" => {
                self.precision = match value {
                    "single" => Precision::Single,
                    "double" => Precision::Double,
                    _ => {
                        return Err(Error::Config(format!(
                            "key 'precision': expected single or double, got '{value}'"
                        )))
                    }
                }
            }
            "seed" => self.seed = parse_num(key, value)?,
            "out_dir" => self.out_dir = value.to_string(),
            "checkpoint_every" => self.checkpoint_every = parse_num(key, value)?,
            "val_every" => self.val_every = parse_num(key, value)?,
            "log_every" => self.log_every = parse_num(key, value)?,

            "model.kind" => self.model.kind = NetKind::parse(value)?,
            "model.n_dense" => self.model.n_dense = parse_num(key, value)?,
            "model.k_dense" => self.model.k_dense = parse_num(key, value)?,
            "model.num_blocks" => self.model.num_blocks = parse_num(key, value)?,
            "model.width" => self.model.block.width = parse_num(key, value)?,
            "model.k_large" => self.model.block.k_large = parse_num(key, value)?,
            "model.k_small" => self.model.block.k_small = parse_num(key, value)?,
            "model.use_bn" => self.model.use_bn = parse_bool(key, value)?,
            "model.remove_second_dense" => {
                self.model.remove_second_dense = parse_bool(key, value)?
            }
            "model.in_channels" => self.model.in_channels = parse_num(key, value)?,
            "model.desk_scale" => self.model.desk_scale = parse_bool(key, value)?,

            "optim.lr0" => self.optim.lr0 = parse_num(key, value)?,
            "optim.momentum" => self.optim.momentum = parse_num(key, value)?,
            "optim.weight_decay" => self.optim.weight_decay = parse_num(key, value)?,
            "optim.lr_drop_every" => self.optim.lr_drop_every = parse_num(key, value)?,
            "optim.lr_drop_factor" => self.optim.lr_drop_factor = parse_num(key, value)?,
            "optim.batch_size" => self.optim.batch_size = parse_num(key, value)?,
            "optim.max_iters" => self.optim.max_iters = parse_num(key, value)?,

            "data.sigma" => self.sigma = parse_num(key, value)?,
            "data.sr_factor" => self.sr_factor = parse_num(key, value)?,
            "data.sr_factors" => {
                self.sr_factors = value
                    .split(',')
                    .map(|p| parse_num::<usize>(key, p.trim()))
                    .collect::<Result<Vec<_>>>()?;
            }
            "data.patch_size" => self.patch_size = parse_num(key, value)?,
            "data.stride" => self.stride = parse_num(key, value)?,
            "data.train" => {
                self.train_manifest = if value.is_empty() { None } else { Some(value.into()) }
            }
            "data.val" => {
                self.val_manifest = if value.is_empty() { None } else { Some(value.into()) }
            }

            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Parse config text. Unknown keys and malformed lines are errors that
    /// name the offending line.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
                line: i + 1,
                reason: format!("expected 'key = value', got '{line}'"),
            })?;
            cfg.apply(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(reason) => Error::ConfigParse { line: i + 1, reason },
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text)
    }

    /// Canonical text form: every key, fixed order, one value per line.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "task = {}", self.task.as_str());
        let _ = writeln!(s, "precision = {}", self.precision);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "out_dir = {}", self.out_dir);
        let _ = writeln!(s, "checkpoint_every = {}", self.checkpoint_every);
        let _ = writeln!(s, "val_every = {}", self.val_every);
        let _ = writeln!(s, "log_every = {}", self.log_every);
        s.push('\n');
        let m = &self.model;
        let _ = writeln!(s, "model.kind = {}", m.kind.as_str());
        let _ = writeln!(s, "model.n_dense = {}", m.n_dense);
        let _ = writeln!(s, "model.k_dense = {}", m.k_dense);
        let _ = writeln!(s, "model.num_blocks = {}", m.num_blocks);
        let _ = writeln!(s, "model.width = {}", m.block.width);
        let _ = writeln!(s, "model.k_large = {}", m.block.k_large);
        let _ = writeln!(s, "model.k_small = {}", m.block.k_small);
        let _ = writeln!(s, "model.use_bn = {}", m.use_bn);
        let _ = writeln!(s, "model.remove_second_dense = {}", m.remove_second_dense);
        let _ = writeln!(s, "model.in_channels = {}", m.in_channels);
        let _ = writeln!(s, "model.desk_scale = {}", m.desk_scale);
        s.push('\n');
        let o = &self.optim;
        let _ = writeln!(s, "optim.lr0 = {}", o.lr0);
        let _ = writeln!(s, "optim.momentum = {}", o.momentum);
        let _ = writeln!(s, "optim.weight_decay = {}", o.weight_decay);
        let _ = writeln!(s, "optim.lr_drop_every = {}", o.lr_drop_every);
        let _ = writeln!(s, "optim.lr_drop_factor = {}", o.lr_drop_factor);
        let _ = writeln!(s, "optim.batch_size = {}", o.batch_size);
        let _ = writeln!(s, "optim.max_iters = {}", o.max_iters);
        s.push('\n');
        let _ = writeln!(s, "data.sigma = {}", self.sigma);
        let _ = writeln!(s, "data.sr_factor = {}", self.sr_factor);
        let factors: Vec<String> = self.sr_factors.iter().map(|f| f.to_string()).collect();
        let _ = writeln!(s, "data.sr_factors = {}", factors.join(","));
        let _ = writeln!(s, "data.patch_size = {}", self.patch_size);
        let _ = writeln!(s, "data.stride = {}", self.stride);
        let _ = writeln!(s, "data.train = {}", self.train_manifest.as_deref().unwrap_or(""));
        let _ = writeln!(s, "data.val = {}", self.val_manifest.as_deref().unwrap_or(""));
        s
    }

    /// The corruption the active task applies to clean images.
    pub fn corruption(&self) -> CorruptionSpec {
        match self.task {
            Task::Denoise => CorruptionSpec::GaussianNoise { sigma: self.sigma },
            Task::Sr => CorruptionSpec::Sr { factor: self.sr_factor },
            Task::SrBlind => CorruptionSpec::SrBlind { factors: self.sr_factors.clone() },
        }
    }

    /// Cross-field consistency on top of the model/optimizer validators.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.optim.validate()?;
        self.corruption().validate()?;
        if self.patch_size == 0 || self.stride == 0 {
            return Err(Error::Config("patch_size and stride must be >= 1".into()));
        }
        let field = self.model.max_kernel();
        if self.patch_size < field {
            return Err(Error::Config(format!(
                "patch_size {} is smaller than the largest filter {}",
                self.patch_size, field
            )));
        }
        Ok(())
    }
}
