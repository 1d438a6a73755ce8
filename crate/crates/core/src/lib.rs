pub mod error;
pub mod generator;
pub mod masks;
pub mod metrics;
pub mod midi;
pub mod model;
pub mod synth;
pub mod tokenizer;

pub use error::{Error, Result};
