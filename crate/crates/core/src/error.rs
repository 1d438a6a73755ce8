use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed MIDI file: {0}")]
    MalformedFile(String),

    #[error("no notes survive preprocessing")]
    EmptySequence,

    #[error("role sequence violates the token layout at position {position}: {reason}")]
    RoleMismatch { position: usize, reason: String },

    #[error("sequence of length {len} exceeds max_len {max_len}")]
    SequenceTooLong { len: usize, max_len: usize },

    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    IdOutOfRange { id: u32, vocab_size: usize },

    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),

    #[error("relative window {window} is smaller than sequence length {len}")]
    WindowTooSmall { window: usize, len: usize },

    #[error("batch contains no trainable targets")]
    EmptyBatch,

    #[error("probability vector has no mass")]
    DegenerateDistribution,

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported file version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },

    #[error("vocabulary hash mismatch: file has {found:#018x}, expected {expected:#018x}")]
    VocabularyHashMismatch { found: u64, expected: u64 },

    #[error("bad file format in {path:?}: {reason}")]
    BadFormat { path: Option<PathBuf>, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
