//! Binary checkpoint container.
//!
//! Layout: the magic bytes `HANSTCK\0`, a little-endian `u32` format
//! version, a little-endian `u64` header length, a JSON header
//! ([`CheckpointHeader`]), then every parameter's values as little-endian
//! `f64` in header order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::model::Model;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::util::{read_bytes, write_atomic};

const MAGIC: &[u8; 8] = b"HANSTCK\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub config: ModelConfig,
    pub vocab_hash: String,
    pub params: Vec<ParamEntry>,
}

pub fn encode_checkpoint(model: &Model, vocab_hash: &str) -> Vec<u8> {
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        config: model.config().clone(),
        vocab_hash: vocab_hash.to_string(),
        params: model
            .params()
            .iter()
            .map(|(_, p)| ParamEntry {
                name: p.name.clone(),
                shape: p.tensor.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(20 + json.len() + 8 * model.count_parameters());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, p) in model.params().iter() {
        for x in p.tensor.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::IncompatibleCheckpoint("truncated checkpoint".into()));
    }
    let (head, tail) = bytes.split_at(n);
    *bytes = tail;
    Ok(head)
}

/// Parses a checkpoint into its header and a model holding the stored values.
pub fn decode_checkpoint(mut bytes: &[u8]) -> Result<(CheckpointHeader, Model)> {
    if take(&mut bytes, 8)? != MAGIC {
        return Err(Error::IncompatibleCheckpoint("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(take(&mut bytes, 4)?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::IncompatibleCheckpoint(format!(
            "format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let len = u64::from_le_bytes(take(&mut bytes, 8)?.try_into().expect("8 bytes")) as usize;
    let header: CheckpointHeader = serde_json::from_slice(take(&mut bytes, len)?)?;

    // Construct with a throwaway rng; every value is overwritten below.
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    let mut model = Model::new(header.config.clone(), &mut rng)?;
    if model.params().len() != header.params.len() {
        return Err(Error::IncompatibleCheckpoint(
            "parameter list does not match the configured architecture".into(),
        ));
    }
    for ((_, p), entry) in model.params_mut().iter_mut().zip(&header.params) {
        if p.name != entry.name || p.tensor.shape() != entry.shape.as_slice() {
            return Err(Error::IncompatibleCheckpoint(format!(
                "parameter `{}` {:?} does not match `{}` {:?}",
                entry.name,
                entry.shape,
                p.name,
                p.tensor.shape()
            )));
        }
        let raw = take(&mut bytes, 8 * p.tensor.numel())?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        p.tensor = Tensor::new(entry.shape.clone(), values)?;
    }
    if !bytes.is_empty() {
        return Err(Error::IncompatibleCheckpoint("trailing bytes after parameters".into()));
    }
    Ok((header, model))
}

pub fn save_checkpoint(path: &Path, model: &Model, vocab_hash: &str) -> Result<()> {
    write_atomic(path, &encode_checkpoint(model, vocab_hash))
}

/// Loads a checkpoint and checks it against the session's expectations.
pub fn load_checkpoint(path: &Path, expected_vocab_hash: &str, expected_config: Option<&ModelConfig>) -> Result<Model> {
    let (header, model) = decode_checkpoint(&read_bytes(path)?)?;
    if header.vocab_hash != expected_vocab_hash {
        return Err(Error::IncompatibleCheckpoint(format!(
            "vocabulary hash {} does not match session vocabulary {}",
            header.vocab_hash, expected_vocab_hash
        )));
    }
    if let Some(cfg) = expected_config {
        if &header.config != cfg {
            return Err(Error::IncompatibleCheckpoint(
                "model configuration differs from the session configuration".into(),
            ));
        }
    }
    Ok(model)
}
