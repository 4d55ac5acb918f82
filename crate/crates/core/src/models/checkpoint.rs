// SPDX-License-Identifier: Apache-2.0

//! Model checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! "QDCK" | u32 version=1 | u64 meta_len | meta JSON
//! u32 count | per tensor: u32 name_len | name | u32 rank | rank*u64 dims | f64 payload
//! ```
//!
//! Batch-norm running statistics are stored as `state.bn{i}.mean` and
//! `state.bn{i}.var`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, ModelError};
use crate::diffcore::{ParamSet, RunningStats, Tensor};
use crate::graphio::{DataError, LabelNormalizer, Target};

pub const CKPT_MAGIC: [u8; 4] = *b"QDCK";
pub const CKPT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub seed: u64,
    pub target: Target,
    pub normalizer: LabelNormalizer,
    /// Effective training configuration, echoed for provenance.
    #[serde(default)]
    pub training: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub model: Model,
}

fn state_names(i: usize) -> (String, String) {
    (format!("state.bn{i}.mean"), format!("state.bn{i}.var"))
}

pub fn write_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let meta = serde_json::to_vec(&ck.meta).expect("metadata serializes");
    let mut tensors: Vec<(String, Tensor)> = ck
        .model
        .params
        .iter()
        .map(|(n, p)| (n.to_string(), p.value.clone()))
        .collect();
    for (i, st) in ck.model.stats.iter().enumerate() {
        let (m, v) = state_names(i);
        tensors.push((m, Tensor::vector(st.mean.clone())));
        tensors.push((v, Tensor::vector(st.var.clone())));
    }
    let mut out = Vec::new();
    out.extend_from_slice(&CKPT_MAGIC);
    out.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in &tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for d in t.shape() {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        out.extend_from_slice(&t.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], DataError> {
        if self.buf.len() - self.pos < n {
            return Err(DataError::Truncated(format!("{what} at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, DataError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, DataError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn len(&mut self, what: &str) -> Result<usize, DataError> {
        let v = self.u64(what)?;
        usize::try_from(v).map_err(|_| DataError::Truncated(format!("{what} {v} too large")))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Checkpoint, ModelError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if magic != CKPT_MAGIC {
        return Err(DataError::Magic {
            expected: CKPT_MAGIC,
            found: magic,
        }
        .into());
    }
    let version = r.u32("version")?;
    if version != CKPT_VERSION {
        return Err(DataError::Version(version).into());
    }
    let meta_len = r.len("metadata length")?;
    let meta: CheckpointMeta = serde_json::from_slice(r.take(meta_len, "metadata")?)
        .map_err(|e| ModelError::Checkpoint(format!("metadata: {e}")))?;
    meta.model.validate()?;

    let count = r.u32("tensor count")? as usize;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let name_len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|_| ModelError::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32("rank")? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(r.len("dimension")?);
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(8).map(|_| n))
            .ok_or_else(|| ModelError::Checkpoint(format!("{name}: shape {shape:?} overflows")))?;
        let payload = r.take(numel * 8, "tensor payload")?;
        let data: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(DataError::NonFinite(format!("checkpoint tensor {name}")).into());
        }
        if tensors.insert(name.clone(), Tensor::new(shape, data)?).is_some() {
            return Err(ModelError::Checkpoint(format!("duplicate tensor {name}")));
        }
    }
    if r.pos != bytes.len() {
        return Err(DataError::TrailingBytes(bytes.len() - r.pos).into());
    }

    let mut params = ParamSet::new();
    for (name, shape) in meta.model.param_shapes() {
        let t = tensors
            .remove(&name)
            .ok_or_else(|| ModelError::Checkpoint(format!("missing tensor {name}")))?;
        if t.shape() != shape.as_slice() {
            return Err(ModelError::Checkpoint(format!(
                "{name} has shape {:?}, config implies {shape:?}",
                t.shape()
            )));
        }
        params.insert(name, t);
    }
    let mut stats = Vec::new();
    for i in 0..meta.model.conv_layers {
        let (m, v) = state_names(i);
        let mut get = |n: &String| {
            tensors
                .remove(n)
                .filter(|t| t.shape() == [meta.model.conv_dim])
                .map(|t| t.into_data())
                .ok_or_else(|| ModelError::Checkpoint(format!("missing or misshapen {n}")))
        };
        stats.push(RunningStats {
            mean: get(&m)?,
            var: get(&v)?,
        });
    }
    if let Some(extra) = tensors.keys().next() {
        return Err(ModelError::Checkpoint(format!("unexpected tensor {extra}")));
    }
    Ok(Checkpoint {
        model: Model {
            config: meta.model.clone(),
            params,
            stats,
        },
        meta,
    })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), ModelError> {
    fs::write(path, write_checkpoint(ck)).map_err(|e| DataError::io(path, e).into())
}

/// Reads a checkpoint, rejecting it when its architecture differs from
/// `expected`.
pub fn load_checkpoint(path: &Path, expected: Option<&ModelConfig>) -> Result<Checkpoint, ModelError> {
    let bytes = fs::read(path).map_err(|e| ModelError::from(DataError::io(path, e)))?;
    let ck = read_checkpoint(&bytes)?;
    if let Some(cfg) = expected {
        if &ck.meta.model != cfg {
            return Err(ModelError::Checkpoint(format!(
                "{}: model config {:?} does not match expected {:?}",
                path.display(),
                ck.meta.model,
                cfg
            )));
        }
    }
    Ok(ck)
}
