//! Decoder-only transformer with relative self-attention.

pub mod checkpoint;
pub mod forward;
pub mod gradcheck;
pub mod incremental;
pub mod optim;
pub mod params;
pub mod relative;
pub mod tensor;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointHeader};
pub use forward::{argmax, cross_entropy, ForwardCache, Model};
pub use incremental::Decoder;
pub use optim::{Adam, AdamConfig};
pub use params::{ModelConfig, Params};
pub use relative::{relative_logits, relative_logits_naive};
pub use tensor::{Matrix, Real, Tensor};
pub use train::{Objective, StepStats, TrainConfig, Trainer};
