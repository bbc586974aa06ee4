//! Checkpoint files: magic `RCN1`, a length-prefixed header holding the
//! canonical config text and the iteration count, then one record per
//! network buffer (name, shape, precision tag, raw little-endian values),
//! then optionally the optimizer's velocity buffers.
//!
//! The format is fully pinned so that save → load → save reproduces the
//! file byte for byte and a loaded network's forward pass is bitwise
//! identical to the saved one's.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic            4 bytes  "RCN1"
//! config_len       u32      length of the canonical config text
//! config           bytes    RunConfig::serialize output (UTF-8)
//! iteration        u64      completed optimizer steps
//! buffer_count     u32
//! buffer record ×buffer_count:
//!     name_len     u32
//!     name         bytes    e.g. "block0.unit2.conv.weights"
//!     rank         u8       number of dims (1 or 4)
//!     dims         u64 ×rank
//!     precision    u8       bytes per value: 4 (f32) or 8 (f64)
//!     values       raw little-endian scalars, product(dims) of them
//! has_velocities   u8       0 or 1
//! velocity record ×trainable-buffer-count (present iff has_velocities):
//!     len          u64
//!     precision    u8
//!     values       raw little-endian scalars
//! ```
//!
//! Velocity records carry no names: they follow the network's trainable
//! parameter traversal order, which the config reconstructs exactly.

use std::path::Path;

use rcnet_core::model::Network;
use rcnet_core::{Precision, Scalar};

use crate::config::RunConfig;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"RCN1";

/// One parameter or running-stat buffer as stored on disk.
#[derive(Debug, Clone)]
pub struct BufferRecord {
    pub name: String,
    pub dims: Vec<u64>,
    pub precision: Precision,
    /// Raw little-endian scalar bytes.
    pub bytes: Vec<u8>,
}

/// A checkpoint file decoded into memory, still precision-agnostic.
/// `instantiate::<S>` turns it into a network once the caller has picked
/// the scalar type from [`RawCheckpoint::precision`].
#[derive(Debug, Clone)]
pub struct RawCheckpoint {
    pub config: RunConfig,
    pub iteration: u64,
    pub buffers: Vec<BufferRecord>,
    /// Per-trainable-buffer velocity values, in traversal order.
    pub velocities: Option<Vec<BufferRecord>>,
}

/// Serialize a network (and optionally its optimizer velocities) to bytes.
pub fn encode<S: Scalar>(
    config: &RunConfig,
    net: &Network<S>,
    iteration: u64,
    velocities: Option<&[Vec<S>]>,
) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);

    // The stored config always names the precision actually written, so a
    // loader can dispatch before touching any record.
    let mut stored = config.clone();
    stored.precision = S::PRECISION;
    let text = stored.serialize();
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&iteration.to_le_bytes());

    out.extend_from_slice(&(net.buffer_count() as u32).to_le_bytes());
    net.visit_buffers(&mut |name, _, dims, values| {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(dims.len() as u8);
        for &d in dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        out.push(S::PRECISION.bytes() as u8);
        for &v in values {
            v.write_le(&mut out);
        }
    });

    match velocities {
        None => out.push(0),
        Some(vels) => {
            out.push(1);
            for v in vels {
                out.extend_from_slice(&(v.len() as u64).to_le_bytes());
                out.push(S::PRECISION.bytes() as u8);
                for &x in v {
                    x.write_le(&mut out);
                }
            }
        }
    }
    out
}

pub fn save<S: Scalar>(
    path: impl AsRef<Path>,
    config: &RunConfig,
    net: &Network<S>,
    iteration: u64,
    velocities: Option<&[Vec<S>]>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(config, net, iteration, velocities);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Cursor over the raw bytes with context-carrying bounds checks.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::checkpoint(self.path, format!("truncated while reading {what}"))
        })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, len: usize, what: &str) -> Result<String> {
        String::from_utf8(self.take(len, what)?.to_vec())
            .map_err(|_| Error::checkpoint(self.path, format!("{what} is not UTF-8")))
    }

    fn precision(&mut self, what: &str) -> Result<Precision> {
        let tag = self.u8(what)?;
        Precision::from_bytes(tag)
            .ok_or_else(|| Error::checkpoint(self.path, format!("{what}: bad precision tag {tag}")))
    }
}

pub fn load(path: impl AsRef<Path>) -> Result<RawCheckpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { bytes: &bytes, pos: 0, path };

    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::checkpoint(
            path,
            format!("bad magic {magic:?} (expected RCN1); not a checkpoint or wrong version"),
        ));
    }

    let config_len = r.u32("config length")? as usize;
    let config_text = r.string(config_len, "config text")?;
    let config = RunConfig::parse(&config_text)?;
    let iteration = r.u64("iteration")?;

    let buffer_count = r.u32("buffer count")? as usize;
    let mut buffers = Vec::with_capacity(buffer_count);
    for i in 0..buffer_count {
        let what = format!("buffer {i}");
        let name_len = r.u32(&what)? as usize;
        let name = r.string(name_len, &what)?;
        let rank = r.u8(&name)? as usize;
        let mut dims = Vec::with_capacity(rank);
        let mut count = 1u64;
        for _ in 0..rank {
            let d = r.u64(&name)?;
            count = count.saturating_mul(d);
            dims.push(d);
        }
        let precision = r.precision(&name)?;
        let nbytes = (count as usize).saturating_mul(precision.bytes());
        let raw = r.take(nbytes, &name)?;
        buffers.push(BufferRecord { name, dims, precision, bytes: raw.to_vec() });
    }

    let has_vel = r.u8("velocity flag")?;
    let velocities = match has_vel {
        0 => None,
        1 => {
            let n_trainable = buffers.iter().filter(|b| !b.name.contains(".running_")).count();
            let mut vels = Vec::with_capacity(n_trainable);
            for i in 0..n_trainable {
                let what = format!("velocity {i}");
                let len = r.u64(&what)?;
                let precision = r.precision(&what)?;
                let nbytes = (len as usize).saturating_mul(precision.bytes());
                let raw = r.take(nbytes, &what)?;
                vels.push(BufferRecord {
                    name: String::new(),
                    dims: vec![len],
                    precision,
                    bytes: raw.to_vec(),
                });
            }
            Some(vels)
        }
        other => {
            return Err(Error::checkpoint(path, format!("bad velocity flag {other}")));
        }
    };

    if r.pos != bytes.len() {
        return Err(Error::checkpoint(
            path,
            format!("{} trailing bytes after the last record", bytes.len() - r.pos),
        ));
    }

    Ok(RawCheckpoint { config, iteration, buffers, velocities })
}

fn decode_values<S: Scalar>(record: &BufferRecord, path: &Path) -> Result<Vec<S>> {
    if record.precision != S::PRECISION {
        return Err(Error::checkpoint(
            path,
            format!(
                "buffer '{}' holds {} values but the run is {}",
                record.name, record.precision, S::PRECISION
            ),
        ));
    }
    let width = S::PRECISION.bytes();
    Ok(record.bytes.chunks_exact(width).map(S::read_le).collect())
}

impl RawCheckpoint {
    /// The scalar width of the stored buffers (they are all one width).
    pub fn precision(&self) -> Precision {
        self.config.precision
    }

    /// Rebuild the network this checkpoint describes: construct from the
    /// embedded config, then overwrite every buffer with the stored values.
    /// Names, shapes, and precision must all line up with what the config
    /// builds, otherwise the file and its header contradict each other.
    pub fn instantiate<S: Scalar>(&self, path_for_errors: impl AsRef<Path>) -> Result<Network<S>> {
        let path = path_for_errors.as_ref();
        let mut net: Network<S> =
            Network::build(self.config.model.clone(), self.config.seed)?;
        if net.buffer_count() != self.buffers.len() {
            return Err(Error::checkpoint(
                path,
                format!(
                    "config builds {} buffers but the file stores {}",
                    net.buffer_count(),
                    self.buffers.len()
                ),
            ));
        }
        let mut decoded = Vec::with_capacity(self.buffers.len());
        for record in &self.buffers {
            decoded.push(decode_values::<S>(record, path)?);
        }
        let mut idx = 0;
        let mut mismatch: Option<String> = None;
        net.visit_buffers_mut(&mut |name, _, values| {
            let record = &self.buffers[idx];
            let stored = &decoded[idx];
            if record.name != name {
                mismatch.get_or_insert_with(|| {
                    format!("buffer {idx} is named '{}' but the config builds '{name}'", record.name)
                });
            } else if stored.len() != values.len() {
                mismatch.get_or_insert_with(|| {
                    format!(
                        "buffer '{name}' stores {} values but the network needs {}",
                        stored.len(),
                        values.len()
                    )
                });
            } else {
                values.copy_from_slice(stored);
            }
            idx += 1;
        });
        if let Some(reason) = mismatch {
            return Err(Error::checkpoint(path, reason));
        }
        Ok(net)
    }

    /// Decode the stored optimizer velocities, if any.
    pub fn velocities<S: Scalar>(
        &self,
        path_for_errors: impl AsRef<Path>,
    ) -> Result<Option<Vec<Vec<S>>>> {
        let path = path_for_errors.as_ref();
        match &self.velocities {
            None => Ok(None),
            Some(records) => {
                let mut out = Vec::with_capacity(records.len());
                for r in records {
                    out.push(decode_values::<S>(r, path)?);
                }
                Ok(Some(out))
            }
        }
    }
}
