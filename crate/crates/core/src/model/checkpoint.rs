//! Binary checkpoint container.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! magic     8 bytes  "MSTCNCKP"
//! version   u32
//! config    u32 length + UTF-8 JSON of ModelConfig
//! metadata  u32 length + UTF-8 JSON of TrainingMetadata
//! count     u32 number of tensors
//! tensor*   u32 name length, name bytes, u32 rank, rank × u32 dims,
//!           product(dims) × f32 little-endian payload
//! ```
//!
//! Tensors appear in model parameter order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::Mstcn;
use crate::tensorcore::Tensor;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MSTCNCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Provenance recorded alongside the weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub best_valid_loss: Option<f64>,
    pub note: String,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Mstcn<f32>,
    pub metadata: TrainingMetadata,
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::Checkpoint(e.to_string()))
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("value {v} exceeds u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) -> Result<()> {
    put_u32(out, bytes.len())?;
    out.extend_from_slice(bytes);
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| {
                Error::Checkpoint(format!(
                    "truncated while reading {what} at byte {}",
                    self.pos
                ))
            })?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn bytes(&mut self, what: &str) -> Result<&'a [u8]> {
        let n = self.u32(what)?;
        self.take(n, what)
    }

    fn str(&mut self, what: &str) -> Result<&'a str> {
        std::str::from_utf8(self.bytes(what)?)
            .map_err(|_| Error::Checkpoint(format!("{what} is not UTF-8")))
    }
}

impl Checkpoint {
    pub fn new(model: Mstcn<f32>, metadata: TrainingMetadata) -> Self {
        Self { model, metadata }
    }

    pub fn config(&self) -> &ModelConfig {
        self.model.config()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        put_bytes(&mut out, to_json(self.model.config())?.as_bytes())?;
        put_bytes(&mut out, to_json(&self.metadata)?.as_bytes())?;
        put_u32(&mut out, self.model.params().len())?;
        for (name, t) in self.model.named_params() {
            put_bytes(&mut out, name.as_bytes())?;
            put_u32(&mut out, t.shape().len())?;
            for &d in t.shape() {
                put_u32(&mut out, d)?;
            }
            for v in t.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut c = Cursor { data, pos: 0 };
        if c.take(8, "magic")? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(
                "bad magic, not an MSTCN checkpoint".into(),
            ));
        }
        let version = c.u32("version")?;
        if version != CHECKPOINT_VERSION as usize {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version}"
            )));
        }
        let config: ModelConfig = serde_json::from_str(c.str("config")?)
            .map_err(|e| Error::Checkpoint(format!("config: {e}")))?;
        let metadata: TrainingMetadata = serde_json::from_str(c.str("metadata")?)
            .map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
        let count = c.u32("tensor count")?;
        let mut named = Vec::with_capacity(count);
        for _ in 0..count {
            let name = c.str("tensor name")?.to_string();
            let rank = c.u32("rank")?;
            let shape = (0..rank)
                .map(|_| c.u32("dims"))
                .collect::<Result<Vec<_>>>()?;
            let len: usize = shape.iter().product();
            let raw = c.take(len * 4, &name)?;
            let values = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            let t = Tensor::new(shape, values)
                .map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
            named.push((name, t));
        }
        if c.pos != data.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes",
                data.len() - c.pos
            )));
        }
        Ok(Self {
            model: Mstcn::from_named(config, named)?,
            metadata,
        })
    }

    pub fn write(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes()?)
            .map_err(|e| Error::Checkpoint(format!("write failed: {e}")))
    }

    pub fn read(mut r: impl Read) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)
            .map_err(|e| Error::Checkpoint(format!("read failed: {e}")))?;
        Self::from_bytes(&buf)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&data)
    }
}
