use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use musattn::metrics::{aggregate, evaluate, CorpusSummary, EvalReport};
use musattn::midi::parse_midi;
use musattn::tokenizer::key::parse_key_name;
use musattn::tokenizer::{encode_notes, quantize_song, MetaInfo, TokenSequence, Vocabulary};
use serde::{Deserialize, Serialize};

use super::generate::{ManifestEntry, TokenFile};
use crate::config::{load_config, set};
use crate::fsutil::{read_json, read_jsonl, resolve, write_atomic, write_json, write_jsonl};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateConfig {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            manifest: PathBuf::from("samples/manifest.jsonl"),
            out_dir: PathBuf::from("eval"),
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct EvaluateArgs {
    /// `manifest.jsonl` written by `generate`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl EvaluateArgs {
    pub fn resolve(&self, file: Option<&Path>) -> Result<EvaluateConfig> {
        let mut c: EvaluateConfig = load_config(file)?;
        set(&mut c.manifest, &self.manifest);
        set(&mut c.out_dir, &self.out_dir);
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceReport {
    pub path: String,
    #[serde(flatten)]
    pub report: EvalReport,
}

/// Vocabulary stored next to the manifest, or the default one.
pub fn manifest_vocabulary(dir: &Path) -> Result<Vocabulary> {
    let path = dir.join("vocab.json");
    if path.exists() {
        Ok(Vocabulary::load(&path)?)
    } else {
        Ok(Vocabulary::default())
    }
}

/// The piece's token stream in generated order. Without a token file the
/// MIDI is re-encoded, which puts notes in canonical order.
pub fn load_piece(dir: &Path, entry: &ManifestEntry, vocab: &Vocabulary) -> Result<TokenSequence> {
    let tokens = resolve(dir, Path::new(&entry.tokens));
    if !entry.tokens.is_empty() && tokens.exists() {
        let file: TokenFile = read_json(&tokens)?;
        return file.sequence(vocab);
    }
    let midi = resolve(dir, Path::new(&entry.path));
    let bytes = std::fs::read(&midi).with_context(|| format!("reading {}", midi.display()))?;
    let song = parse_midi(&bytes)?;
    let key = parse_key_name(&entry.key).with_context(|| format!("unknown key {:?}", entry.key))?;
    let meta = MetaInfo::new(entry.bars, key, entry.bpm);
    let notes = match quantize_song(&song, vocab, None) {
        Ok((_, notes)) => notes,
        Err(musattn::Error::EmptySequence) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    Ok(encode_notes(&meta, &notes, vocab))
}

pub fn run(cfg: &EvaluateConfig) -> Result<CorpusSummary> {
    let entries: Vec<ManifestEntry> = read_jsonl(&cfg.manifest)?;
    if entries.is_empty() {
        bail!("manifest {} lists no pieces", cfg.manifest.display());
    }
    let dir = cfg.manifest.parent().unwrap_or(Path::new("."));
    let vocab = manifest_vocabulary(dir)?;
    let mut reports = Vec::with_capacity(entries.len());
    for entry in &entries {
        let seq = load_piece(dir, entry, &vocab)?;
        let key = parse_key_name(&entry.key).with_context(|| format!("unknown key {:?}", entry.key))?;
        reports.push(PieceReport {
            path: entry.path.clone(),
            report: evaluate(&seq, &vocab, entry.bars, key),
        });
    }
    let summary = aggregate(&reports.iter().map(|r| r.report).collect::<Vec<_>>())?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    write_json(&cfg.out_dir.join("config.json"), cfg)?;
    write_jsonl(&cfg.out_dir.join("reports.jsonl"), &reports)?;
    write_atomic(&cfg.out_dir.join("summary.csv"), summary.to_csv().as_bytes())?;
    write_atomic(&cfg.out_dir.join("summary.txt"), summary.to_text().as_bytes())?;
    Ok(summary)
}
