use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use musattn::generator::{generate, SamplingConfig, StopReason, SAMPLER_RNG};
use musattn::masks::MaskSpec;
use musattn::midi::write_midi;
use musattn::model::load_checkpoint;
use musattn::tokenizer::key::{key_name, parse_key_name};
use musattn::tokenizer::{decode_tokens, MetaInfo, Role, TokenSequence, Vocabulary};
use serde::{Deserialize, Serialize};

use crate::config::{load_config, set, MaskArgs};
use crate::fsutil::{write_atomic, write_json, write_jsonl};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    pub checkpoint: PathBuf,
    pub out_dir: PathBuf,
    pub bars: u32,
    pub key: String,
    pub bpm: f64,
    pub count: usize,
    pub sampling: SamplingConfig,
    /// Mask override; the checkpoint's training mask when absent.
    pub mask: Option<MaskSpec>,
    pub dump_heatmaps: bool,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            checkpoint: PathBuf::from("runs/final.ckpt"),
            out_dir: PathBuf::from("samples"),
            bars: 16,
            key: "Cmaj".into(),
            bpm: 80.0,
            count: 1,
            sampling: SamplingConfig::default(),
            mask: None,
            dump_heatmaps: false,
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct GenerateArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Requested number of bars.
    #[arg(long)]
    bars: Option<u32>,
    /// Requested key, e.g. `Cmaj`, `F#min`.
    #[arg(long)]
    key: Option<String>,
    #[arg(long)]
    bpm: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Seed of the first piece; piece `i` uses `seed + i`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    max_tokens: Option<usize>,
    /// Only sample tokens of the role expected next.
    #[arg(long)]
    role_constrained: bool,
    /// Write per-step role-block probabilities for each piece.
    #[arg(long)]
    dump_heatmaps: bool,
    #[command(flatten)]
    mask: MaskArgs,
}

impl GenerateArgs {
    pub fn resolve(&self, file: Option<&Path>) -> Result<GenerateConfig> {
        let mut c: GenerateConfig = load_config(file)?;
        set(&mut c.checkpoint, &self.checkpoint);
        set(&mut c.out_dir, &self.out_dir);
        set(&mut c.bars, &self.bars);
        set(&mut c.key, &self.key);
        set(&mut c.bpm, &self.bpm);
        set(&mut c.sampling.temperature, &self.temperature);
        set(&mut c.sampling.seed, &self.seed);
        set(&mut c.count, &self.count);
        set(&mut c.sampling.max_tokens, &self.max_tokens);
        c.sampling.role_constrained |= self.role_constrained;
        c.dump_heatmaps |= self.dump_heatmaps;
        if !self.mask.is_empty() {
            let mut spec = c.mask.unwrap_or_default();
            self.mask.apply(&mut spec);
            c.mask = Some(spec);
        }
        Ok(c)
    }
}

/// One line of `manifest.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// MIDI file, relative to the manifest.
    pub path: String,
    /// Token file, relative to the manifest.
    pub tokens: String,
    pub bars: u32,
    pub key: String,
    pub bpm: f64,
    pub temperature: f64,
    pub seed: u64,
    pub mask: MaskSpec,
    pub stop: StopReason,
    pub rng: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenFile {
    pub ids: Vec<u32>,
    pub roles: Vec<Role>,
}

impl TokenFile {
    pub fn sequence(&self, vocab: &Vocabulary) -> Result<TokenSequence> {
        let seq = TokenSequence::from_ids(self.ids.clone(), vocab)?;
        if seq.roles != self.roles {
            bail!("token roles do not match the vocabulary");
        }
        Ok(seq)
    }
}

pub fn run(cfg: &GenerateConfig) -> Result<Vec<ManifestEntry>> {
    let key = parse_key_name(&cfg.key).with_context(|| format!("unknown key {:?}", cfg.key))?;
    if cfg.bars == 0 {
        bail!("bars must be at least 1");
    }
    if !(cfg.bpm > 0.0 && cfg.bpm.is_finite()) {
        bail!("bpm must be positive");
    }
    cfg.sampling.validate()?;
    let ckpt = load_checkpoint(&cfg.checkpoint)?;
    let vocab = Vocabulary::new(ckpt.header.max_bars);
    ckpt.check_vocab(&vocab)?;
    if cfg.bars as usize > vocab.max_bars() {
        bail!("bars {} exceeds the vocabulary's {} bars", cfg.bars, vocab.max_bars());
    }
    let mask = cfg.mask.unwrap_or(ckpt.header.train.mask);
    mask.validate()?;
    let model = ckpt.model()?;
    let meta = MetaInfo::new(cfg.bars, key, cfg.bpm);

    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut echoed = cfg.clone();
    echoed.mask = Some(mask);
    write_json(&cfg.out_dir.join("config.json"), &echoed)?;
    write_atomic(&cfg.out_dir.join("vocab.json"), vocab.to_json().as_bytes())?;

    let mut manifest = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let sampling = SamplingConfig {
            seed: cfg.sampling.seed.wrapping_add(i as u64),
            ..cfg.sampling
        };
        let g = generate(&model, &vocab, &meta, &sampling, &mask, cfg.dump_heatmaps)?;
        let stem = format!("piece-{i:03}");
        let midi = format!("{stem}.mid");
        let tokens = format!("{stem}.tokens.json");
        write_atomic(&cfg.out_dir.join(&midi), &write_midi(&decode_tokens(&g.tokens, &vocab)))?;
        write_json(
            &cfg.out_dir.join(&tokens),
            &TokenFile {
                ids: g.tokens.ids.clone(),
                roles: g.tokens.roles.clone(),
            },
        )?;
        if cfg.dump_heatmaps {
            write_jsonl(&cfg.out_dir.join(format!("{stem}.heatmap.jsonl")), &g.steps)?;
        }
        log::info!("{midi}: {} tokens, stop {:?}", g.tokens.len(), g.stop);
        manifest.push(ManifestEntry {
            path: midi,
            tokens,
            bars: cfg.bars,
            key: key_name(key),
            bpm: cfg.bpm,
            temperature: sampling.temperature,
            seed: sampling.seed,
            mask,
            stop: g.stop,
            rng: SAMPLER_RNG.into(),
        });
    }
    write_jsonl(&cfg.out_dir.join("manifest.jsonl"), &manifest)?;
    Ok(manifest)
}
