use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::Args;
use musattn::generator::StepDump;
use musattn::tokenizer::{scan_notes, Role, Vocabulary};
use serde::{Deserialize, Serialize};

use super::evaluate::{load_piece, manifest_vocabulary};
use super::generate::ManifestEntry;
use crate::config::{load_config, set};
use crate::fsutil::{read_jsonl, write_atomic, write_json};
use crate::svg;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            manifest: PathBuf::from("samples/manifest.jsonl"),
            out_dir: PathBuf::from("render"),
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct RenderArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl RenderArgs {
    pub fn resolve(&self, file: Option<&Path>) -> Result<RenderConfig> {
        let mut c: RenderConfig = load_config(file)?;
        set(&mut c.manifest, &self.manifest);
        set(&mut c.out_dir, &self.out_dir);
        Ok(c)
    }
}

/// Probabilities of one role's block over the steps that expected it:
/// `rows[value][i]` for the `i`-th such step.
pub fn role_matrix(steps: &[StepDump], role: Role, vocab: &Vocabulary) -> Vec<Vec<f64>> {
    let size = vocab.block(role).size as usize;
    let picked: Vec<&StepDump> = steps.iter().filter(|s| s.role == role).collect();
    (0..size)
        .map(|v| picked.iter().map(|s| s.probs.get(v).copied().unwrap_or(0.0)).collect())
        .collect()
}

fn matrix_csv(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|p| format!("{p:.6}")).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

/// Files written per piece.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RenderedPiece {
    pub pianoroll: PathBuf,
    pub heatmaps: Vec<PathBuf>,
}

pub fn run(cfg: &RenderConfig) -> Result<Vec<RenderedPiece>> {
    let entries: Vec<ManifestEntry> = read_jsonl(&cfg.manifest)?;
    if entries.is_empty() {
        bail!("manifest {} lists no pieces", cfg.manifest.display());
    }
    let dir = cfg.manifest.parent().unwrap_or(Path::new("."));
    let vocab = manifest_vocabulary(dir)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    write_json(&cfg.out_dir.join("config.json"), cfg)?;

    let mut out = Vec::with_capacity(entries.len());
    for entry in &entries {
        let stem = entry.path.trim_end_matches(".mid").to_string();
        let seq = load_piece(dir, entry, &vocab)?;
        let notes = scan_notes(&seq, &vocab).notes;
        let mut piece = RenderedPiece {
            pianoroll: cfg.out_dir.join(format!("{stem}.pianoroll.svg")),
            heatmaps: Vec::new(),
        };
        write_atomic(&piece.pianoroll, svg::pianoroll(&notes, entry.bars).as_bytes())?;

        let dump = dir.join(format!("{stem}.heatmap.jsonl"));
        if !dump.exists() {
            log::warn!("{stem}: no step dump, skipping heatmaps (generate with --dump-heatmaps)");
            out.push(piece);
            continue;
        }
        let steps: Vec<StepDump> = read_jsonl(&dump)?;
        for role in Role::NOTE {
            let rows = role_matrix(&steps, role, &vocab);
            let name = role.name().to_ascii_lowercase();
            let csv = cfg.out_dir.join(format!("{stem}.heatmap-{name}.csv"));
            let image = cfg.out_dir.join(format!("{stem}.heatmap-{name}.svg"));
            write_atomic(&csv, matrix_csv(&rows).as_bytes())?;
            let title = format!("{stem} {}", role.name());
            write_atomic(&image, svg::heatmap(&rows, &title).as_bytes())?;
            piece.heatmaps.push(image);
        }
        out.push(piece);
    }
    Ok(out)
}
