//! Binary checkpoint container.
//!
//! Layout: 8-byte magic `STLSTMCK`, a little-endian `u64` header length, a
//! UTF-8 JSON header, then every parameter as little-endian `f64` in header
//! order. Offsets and lengths in the header count `f64` elements.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, StLstm};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"STLSTMCK";
pub const FORMAT: &str = "stlstm-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    /// Free-form metadata, e.g. the training configuration.
    #[serde(default)]
    pub meta: serde_json::Value,
    pub params: Vec<ParamEntry>,
}

pub fn to_bytes(model: &StLstm, meta: serde_json::Value) -> Result<Vec<u8>> {
    let mut params = Vec::new();
    let mut offset = 0;
    for (name, t) in model.params.iter() {
        params.push(ParamEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            offset,
            len: t.len(),
        });
        offset += t.len();
    }
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        config: model.config.clone(),
        meta,
        params,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + offset * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for t in model.params.tensors() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_header(bytes: &[u8]) -> Result<(Header, &[u8])> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = &bytes[16..];
    if hlen > body.len() {
        return Err(Error::Checkpoint("truncated header".into()));
    }
    let value: serde_json::Value = serde_json::from_slice(&body[..hlen])?;
    let version = value.get("version").and_then(serde_json::Value::as_u64);
    if version != Some(VERSION as u64) {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {:?} (expected {VERSION})",
            version
        )));
    }
    let header: Header = serde_json::from_value(value)?;
    if header.format != FORMAT {
        return Err(Error::Checkpoint(format!("unknown format {:?}", header.format)));
    }
    Ok((header, &body[hlen..]))
}

pub fn from_bytes(bytes: &[u8]) -> Result<(StLstm, serde_json::Value)> {
    let (header, payload) = read_header(bytes)?;
    if payload.len() % 8 != 0 {
        return Err(Error::Checkpoint("payload is not a whole number of f64 values".into()));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let mut model = StLstm::new(header.config.clone(), 0)?;
    if header.params.len() != model.params.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} parameters, header lists {}",
            model.params.len(),
            header.params.len()
        )));
    }
    let mut tensors = Vec::with_capacity(header.params.len());
    for (entry, name) in header.params.iter().zip(model.params.names()) {
        if &entry.name != name {
            return Err(Error::Checkpoint(format!("expected parameter {name}, found {}", entry.name)));
        }
        let end = entry
            .offset
            .checked_add(entry.len)
            .filter(|&e| e <= values.len())
            .ok_or_else(|| Error::Checkpoint(format!("parameter {name} runs past the payload")))?;
        let t = Tensor::new(&entry.shape, values[entry.offset..end].to_vec())
            .map_err(|e| Error::Checkpoint(format!("parameter {name}: {e}")))?;
        tensors.push(t);
    }
    model.params.load_tensors(tensors)?;
    Ok((model, header.meta))
}

pub fn save(model: &StLstm, meta: serde_json::Value, path: &Path) -> Result<()> {
    let bytes = to_bytes(model, meta)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(StLstm, serde_json::Value)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
