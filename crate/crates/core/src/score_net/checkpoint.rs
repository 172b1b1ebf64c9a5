//! Model checkpoint file: an 8-byte magic, a little-endian `u64` header
//! length, the JSON header, then every parameter array as little-endian
//! `f64` in header order (row-major).

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::diffusion::DiffusionSchedule;
use crate::error::{Error, Result};
use crate::score_net::{NetConfig, ScoreTask};
use crate::systems::VariablePartition;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"OINFCKP1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub net: NetConfig,
    pub schedule: DiffusionSchedule,
    pub partition: VariablePartition,
    /// Tasks the network was trained on.
    pub tasks: Vec<ScoreTask>,
    pub train_config_hash: String,
    /// Full training configuration, for provenance.
    pub train_config: serde_json::Value,
    /// Whether the stored weights are the moving average used for inference.
    pub ema: bool,
    pub param_names: Vec<String>,
    pub param_shapes: Vec<[usize; 2]>,
}

pub fn write_checkpoint(path: &Path, header: &CheckpointHeader, params: &[Array2<f64>]) -> Result<()> {
    let mut buf = Vec::new();
    encode_checkpoint(&mut buf, header, params)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn encode_checkpoint(out: &mut impl Write, header: &CheckpointHeader, params: &[Array2<f64>]) -> Result<()> {
    if params.len() != header.param_shapes.len() {
        return Err(Error::Shape("header and parameter list disagree".into()));
    }
    let json = serde_json::to_vec(header)?;
    let io = |e| Error::io("<checkpoint>", e);
    out.write_all(CHECKPOINT_MAGIC).map_err(io)?;
    out.write_all(&(json.len() as u64).to_le_bytes()).map_err(io)?;
    out.write_all(&json).map_err(io)?;
    for (p, shape) in params.iter().zip(&header.param_shapes) {
        if [p.nrows(), p.ncols()] != *shape {
            return Err(Error::Shape("parameter shape differs from header".into()));
        }
        for v in p.iter() {
            out.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(CheckpointHeader, Vec<Array2<f64>>)> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(CheckpointHeader, Vec<Array2<f64>>)> {
    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a model checkpoint (bad magic)".into()));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = bytes
        .get(16..16 + len)
        .ok_or_else(|| Error::Format("truncated checkpoint header".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(body)?;
    let mut at = 16 + len;
    let mut params = Vec::with_capacity(header.param_shapes.len());
    for &[r, c] in &header.param_shapes {
        let n = r * c * 8;
        let chunk = bytes
            .get(at..at + n)
            .ok_or_else(|| Error::Format("truncated checkpoint payload".into()))?;
        let vals: Vec<f64> = chunk
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        params.push(Array2::from_shape_vec((r, c), vals).map_err(|e| Error::Format(e.to_string()))?);
        at += n;
    }
    if at != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after checkpoint payload",
            bytes.len() - at
        )));
    }
    Ok((header, params))
}
