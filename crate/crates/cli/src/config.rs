use std::path::Path;

use anyhow::Result;
use clap::Args;
use musattn::masks::{MaskKind, MaskSpec};
use serde::de::DeserializeOwned;

use crate::fsutil::read_json;

/// Reads a JSON config file, or the defaults when no file is given.
/// Missing fields take their default values.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => read_json(p),
        None => Ok(T::default()),
    }
}

/// Overwrites `slot` when a flag was given.
pub fn set<T: Clone>(slot: &mut T, flag: &Option<T>) {
    if let Some(v) = flag {
        *slot = v.clone();
    }
}

#[derive(Args, Debug, Default, Clone)]
pub struct MaskArgs {
    /// Attention mask: full, strided or musical.
    #[arg(long)]
    pub mask: Option<MaskKind>,
    /// Local window in tokens.
    #[arg(long)]
    pub window: Option<usize>,
    /// Stride of the distant pattern (strided mask only).
    #[arg(long)]
    pub stride: Option<usize>,
}

impl MaskArgs {
    pub fn apply(&self, spec: &mut MaskSpec) {
        set(&mut spec.kind, &self.mask);
        set(&mut spec.window, &self.window);
        set(&mut spec.stride, &self.stride);
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_none() && self.window.is_none() && self.stride.is_none()
    }
}
