//! Checkpoint files.
//!
//! Layout (little-endian): magic `MWCK`, version `u16`, header length `u32`,
//! the header as JSON, then every tensor of the parameters, the first Adam
//! moments and the second Adam moments, in that order. Each tensor is
//! `ndim: u32`, `ndim` dimensions as `u32`, then the `f32` values.

use std::io::Write;
use std::path::Path;

use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use super::forward::Model;
use super::optim::Adam;
use super::params::{ModelConfig, Params};
use super::tensor::Tensor;
use super::train::{TrainConfig, Trainer};
use crate::error::{Error, Result};
use crate::tokenizer::Vocabulary;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MWCK";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub step: u64,
    pub vocab_hash: String,
    pub max_bars: usize,
    pub rng: Xoshiro256PlusPlus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: Params<f32>,
    pub m: Params<f32>,
    pub v: Params<f32>,
}

fn bad(reason: impl Into<String>) -> Error {
    Error::BadFormat {
        path: None,
        reason: reason.into(),
    }
}

impl Checkpoint {
    pub fn vocab_hash(&self) -> Result<u64> {
        u64::from_str_radix(&self.header.vocab_hash, 16).map_err(|_| bad("vocabulary hash is not hex"))
    }

    pub fn check_vocab(&self, vocab: &Vocabulary) -> Result<()> {
        let found = self.vocab_hash()?;
        if found != vocab.hash() {
            return Err(Error::VocabularyHashMismatch {
                found,
                expected: vocab.hash(),
            });
        }
        Ok(())
    }

    pub fn model(&self) -> Result<Model<f32>> {
        Model::new(self.header.model.clone(), self.params.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for set in [&self.params, &self.m, &self.v] {
            for t in &set.tensors {
                out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
                for &dim in &t.shape {
                    out.extend_from_slice(&(dim as u32).to_le_bytes());
                }
                for &x in &t.data {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        if bytes.len() < 10 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(bad("missing MWCK header"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let header_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let header_bytes = bytes
            .get(10..10 + header_len)
            .ok_or_else(|| bad("checkpoint header truncated"))?;
        let header: CheckpointHeader = serde_json::from_slice(header_bytes)?;
        header.model.validate()?;

        let mut cursor = 10 + header_len;
        let read_u32 = |cursor: &mut usize| -> Result<u32> {
            let w = bytes
                .get(*cursor..*cursor + 4)
                .ok_or_else(|| bad("checkpoint truncated"))?;
            *cursor += 4;
            Ok(u32::from_le_bytes(w.try_into().unwrap()))
        };
        let shapes = header.model.param_shapes();
        let mut sets = Vec::with_capacity(3);
        for _ in 0..3 {
            let mut tensors = Vec::with_capacity(shapes.len());
            for _ in 0..shapes.len() {
                let ndim = read_u32(&mut cursor)? as usize;
                let shape = (0..ndim)
                    .map(|_| read_u32(&mut cursor).map(|d| d as usize))
                    .collect::<Result<Vec<_>>>()?;
                let n: usize = shape.iter().product();
                let data = (0..n)
                    .map(|_| read_u32(&mut cursor).map(f32::from_bits))
                    .collect::<Result<Vec<_>>>()?;
                tensors.push(Tensor { shape, data });
            }
            sets.push(Params::from_tensors(&header.model, tensors)?);
        }
        if cursor != bytes.len() {
            return Err(bad("trailing data after last tensor"));
        }
        let v = sets.pop().unwrap();
        let m = sets.pop().unwrap();
        let params = sets.pop().unwrap();
        Ok(Checkpoint {
            header,
            params,
            m,
            v,
        })
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("checkpoint")
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&checkpoint.to_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    Checkpoint::from_bytes(&bytes).map_err(|e| match e {
        Error::BadFormat { reason, .. } => Error::BadFormat {
            path: Some(path.to_path_buf()),
            reason,
        },
        other => other,
    })
}

impl Trainer {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            header: CheckpointHeader {
                model: self.model.config.clone(),
                train: self.config.clone(),
                step: self.adam.step,
                vocab_hash: format!("{:016x}", self.vocab.hash()),
                max_bars: self.vocab.max_bars(),
                rng: self.rng.clone(),
            },
            params: self.model.params.clone(),
            m: self.adam.m.clone(),
            v: self.adam.v.clone(),
        }
    }

    /// Resumes training. The vocabulary must be the one the checkpoint was
    /// trained with.
    pub fn from_checkpoint(checkpoint: Checkpoint, vocab: Vocabulary) -> Result<Trainer> {
        checkpoint.check_vocab(&vocab)?;
        let Checkpoint {
            header,
            params,
            m,
            v,
        } = checkpoint;
        Ok(Trainer {
            model: Model::new(header.model, params)?,
            adam: Adam {
                config: header.train.adam,
                m,
                v,
                step: header.step,
            },
            rng: header.rng,
            config: header.train,
            vocab,
        })
    }
}
