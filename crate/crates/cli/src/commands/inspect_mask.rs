use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::Args;
use musattn::masks::{pattern_roles, AttentionMask, MaskSpec};
use serde::{Deserialize, Serialize};

use crate::config::{load_config, set, MaskArgs};
use crate::fsutil::{write_atomic, write_json};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InspectMaskConfig {
    pub mask: MaskSpec,
    pub len: usize,
    pub out_dir: PathBuf,
}

impl Default for InspectMaskConfig {
    fn default() -> Self {
        InspectMaskConfig {
            mask: MaskSpec::default(),
            len: 64,
            out_dir: PathBuf::from("masks"),
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct InspectMaskArgs {
    #[command(flatten)]
    mask: MaskArgs,
    /// Sequence length; roles follow a well-formed note stream.
    #[arg(long)]
    len: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl InspectMaskArgs {
    pub fn resolve(&self, file: Option<&Path>) -> Result<InspectMaskConfig> {
        let mut c: InspectMaskConfig = load_config(file)?;
        self.mask.apply(&mut c.mask);
        set(&mut c.len, &self.len);
        set(&mut c.out_dir, &self.out_dir);
        Ok(c)
    }
}

/// Builds the mask and writes `mask-<kind>-<len>.pgm` and `.csv`.
pub fn run(cfg: &InspectMaskConfig) -> Result<(AttentionMask, PathBuf)> {
    if cfg.len == 0 {
        bail!("len must be at least 1");
    }
    let mask = cfg.mask.build(&pattern_roles(cfg.len))?;
    let stem = format!("mask-{}-{}", cfg.mask.kind, cfg.len);
    let pgm = cfg.out_dir.join(format!("{stem}.pgm"));
    write_atomic(&pgm, &mask.to_pgm())?;
    write_atomic(&cfg.out_dir.join(format!("{stem}.csv")), mask.to_csv().as_bytes())?;
    write_json(&cfg.out_dir.join("config.json"), cfg)?;
    Ok((mask, pgm))
}
