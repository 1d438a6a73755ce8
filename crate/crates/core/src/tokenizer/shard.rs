//! Binary dataset shards.
//!
//! Layout (little-endian): magic `MWDS`, version `u16`, vocabulary hash `u64`,
//! record count `u32`, then per record a `u32` length followed by that many
//! `u32` token ids.

use std::path::Path;

use crate::error::{Error, Result};

pub const SHARD_MAGIC: &[u8; 4] = b"MWDS";
pub const SHARD_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shard {
    pub vocab_hash: u64,
    pub records: Vec<Vec<u32>>,
}

impl Shard {
    pub fn to_bytes(&self) -> Vec<u8> {
        let total: usize = self.records.iter().map(|r| 4 + 4 * r.len()).sum();
        let mut out = Vec::with_capacity(18 + total);
        out.extend_from_slice(SHARD_MAGIC);
        out.extend_from_slice(&SHARD_VERSION.to_le_bytes());
        out.extend_from_slice(&self.vocab_hash.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for record in &self.records {
            out.extend_from_slice(&(record.len() as u32).to_le_bytes());
            for id in record {
                out.extend_from_slice(&id.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Shard> {
        let bad = |reason: &str| Error::BadFormat {
            path: None,
            reason: reason.to_string(),
        };
        if bytes.len() < 18 || &bytes[..4] != SHARD_MAGIC {
            return Err(bad("missing MWDS header"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != SHARD_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: SHARD_VERSION,
            });
        }
        let vocab_hash = u64::from_le_bytes(bytes[6..14].try_into().unwrap());
        let count = u32::from_le_bytes(bytes[14..18].try_into().unwrap()) as usize;

        let mut words = bytes[18..].chunks_exact(4);
        if !words.remainder().is_empty() {
            return Err(bad("shard body is not a whole number of u32 words"));
        }
        let mut next = || {
            words
                .next()
                .map(|w| u32::from_le_bytes(w.try_into().unwrap()))
                .ok_or_else(|| bad("shard truncated"))
        };
        let mut records = Vec::with_capacity(count);
        for _ in 0..count {
            let len = next()? as usize;
            let record = (0..len).map(|_| next()).collect::<Result<Vec<_>>>()?;
            records.push(record);
        }
        if next().is_ok() {
            return Err(bad("trailing data after last record"));
        }
        Ok(Shard {
            vocab_hash,
            records,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Shard> {
        let bytes = std::fs::read(path)?;
        Shard::from_bytes(&bytes).map_err(|e| match e {
            Error::BadFormat { reason, .. } => Error::BadFormat {
                path: Some(path.to_path_buf()),
                reason,
            },
            other => other,
        })
    }

    /// Fails unless the shard was built with `expected`'s vocabulary.
    pub fn check_hash(&self, expected: u64) -> Result<()> {
        if self.vocab_hash != expected {
            return Err(Error::VocabularyHashMismatch {
                found: self.vocab_hash,
                expected,
            });
        }
        Ok(())
    }
}
