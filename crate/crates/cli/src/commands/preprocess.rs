use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use musattn::midi::{parse_midi_with_report, DRUM_CHANNEL};
use musattn::tokenizer::quantize::map_program_to_class;
use musattn::tokenizer::shard::Shard;
use musattn::tokenizer::{encode_song, segment, Role, Vocabulary, META_LEN, NOTE_LEN};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::config::{load_config, set};
use crate::fsutil::{write_atomic, write_json};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Piano-class notes only.
    Single,
    /// Every non-drum instrument.
    Multi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub input: PathBuf,
    pub out: PathBuf,
    pub max_len: usize,
    pub mode: Mode,
    pub max_bars: usize,
    pub records_per_shard: usize,
    pub append_eos: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            input: PathBuf::from("midi"),
            out: PathBuf::from("data"),
            max_len: 2048,
            mode: Mode::Single,
            max_bars: 256,
            records_per_shard: 10_000,
            append_eos: true,
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct PreprocessArgs {
    /// Directory searched recursively for .mid/.midi files.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory for shards, vocabulary and stats.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    max_bars: Option<usize>,
    #[arg(long)]
    records_per_shard: Option<usize>,
    /// Do not end each piece with EOS.
    #[arg(long)]
    no_eos: bool,
}

impl PreprocessArgs {
    pub fn resolve(&self, file: Option<&Path>) -> Result<PreprocessConfig> {
        let mut c: PreprocessConfig = load_config(file)?;
        set(&mut c.input, &self.input);
        set(&mut c.out, &self.out);
        set(&mut c.max_len, &self.max_len);
        set(&mut c.mode, &self.mode);
        set(&mut c.max_bars, &self.max_bars);
        set(&mut c.records_per_shard, &self.records_per_shard);
        if self.no_eos {
            c.append_eos = false;
        }
        Ok(c)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PreprocessStats {
    pub files_found: usize,
    pub files_used: usize,
    /// Files that failed to parse.
    pub files_malformed: usize,
    /// Parsed files with no usable notes.
    pub files_empty: usize,
    pub sequences: usize,
    pub records: usize,
    pub notes: usize,
    pub tokens: usize,
    pub shards: Vec<String>,
    pub skipped: Vec<SkippedFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: String,
    pub reason: String,
}

enum Outcome {
    Records { notes: usize, records: Vec<Vec<u32>> },
    Malformed(String),
    Empty(String),
}

fn midi_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.with_context(|| format!("walking {}", dir.display()))?;
        let is_midi = entry
            .path()
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"));
        if entry.file_type().is_file() && is_midi {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

fn process_file(path: &Path, cfg: &PreprocessConfig, vocab: &Vocabulary) -> Outcome {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => return Outcome::Malformed(e.to_string()),
    };
    let (mut song, report) = match parse_midi_with_report(&bytes) {
        Ok(r) => r,
        Err(e) => return Outcome::Malformed(e.to_string()),
    };
    if report.unclosed_notes > 0 {
        log::debug!("{}: {} unclosed note(s)", path.display(), report.unclosed_notes);
    }
    if cfg.mode == Mode::Single {
        for track in &mut song.tracks {
            track.retain(|n| n.channel != DRUM_CHANNEL && map_program_to_class(n.program) == 0);
        }
        song.tracks.retain(|t| !t.is_empty());
    }
    let (_, seq) = match encode_song(&song, vocab, None) {
        Ok(r) => r,
        Err(e) => return Outcome::Empty(e.to_string()),
    };
    let notes = (seq.len() - META_LEN) / NOTE_LEN;
    let mut segments = segment(&seq, cfg.max_len);
    if cfg.append_eos {
        if let Some(last) = segments.last_mut() {
            if last.len() < cfg.max_len {
                last.push(vocab.eos(), Role::Eos);
            }
        }
    }
    Outcome::Records {
        notes,
        records: segments.into_iter().map(|s| s.ids).collect(),
    }
}

pub fn run(cfg: &PreprocessConfig) -> Result<PreprocessStats> {
    if cfg.max_len < 9 {
        bail!("max_len must be at least 9");
    }
    let vocab = Vocabulary::new(cfg.max_bars);
    let files = midi_files(&cfg.input)?;
    let outcomes: Vec<Outcome> = files
        .par_iter()
        .map(|p| process_file(p, cfg, &vocab))
        .collect();

    let mut stats = PreprocessStats {
        files_found: files.len(),
        ..Default::default()
    };
    let mut records = Vec::new();
    for (path, outcome) in files.iter().zip(outcomes) {
        let shown = path
            .strip_prefix(&cfg.input)
            .unwrap_or(path)
            .display()
            .to_string();
        match outcome {
            Outcome::Records { notes, records: r } => {
                stats.files_used += 1;
                stats.sequences += 1;
                stats.notes += notes;
                stats.records += r.len();
                stats.tokens += r.iter().map(Vec::len).sum::<usize>();
                records.extend(r);
            }
            Outcome::Malformed(reason) => {
                log::warn!("skipping {shown}: {reason}");
                stats.files_malformed += 1;
                stats.skipped.push(SkippedFile { path: shown, reason });
            }
            Outcome::Empty(reason) => {
                stats.files_empty += 1;
                stats.skipped.push(SkippedFile { path: shown, reason });
            }
        }
    }
    if records.is_empty() {
        bail!("no valid MIDI files in {}", cfg.input.display());
    }

    std::fs::create_dir_all(&cfg.out)?;
    let hash = vocab.hash();
    for (i, chunk) in records.chunks(cfg.records_per_shard.max(1)).enumerate() {
        let name = format!("shard-{i:05}.mwds");
        let shard = Shard {
            vocab_hash: hash,
            records: chunk.to_vec(),
        };
        write_atomic(&cfg.out.join(&name), &shard.to_bytes())?;
        stats.shards.push(name);
    }
    write_atomic(&cfg.out.join("vocab.json"), vocab.to_json().as_bytes())?;
    write_json(&cfg.out.join("stats.json"), &stats)?;
    write_json(&cfg.out.join("config.json"), cfg)?;
    Ok(stats)
}

/// Reads the vocabulary and every shard of a preprocessed directory,
/// checking each shard against the vocabulary hash.
pub fn load_dataset(dir: &Path) -> Result<(Vocabulary, Vec<Vec<u32>>)> {
    let vocab = Vocabulary::load(&dir.join("vocab.json"))
        .with_context(|| format!("loading vocabulary from {}", dir.display()))?;
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "mwds"))
        .collect();
    names.sort();
    if names.is_empty() {
        bail!("no .mwds shards in {}", dir.display());
    }
    let mut records = Vec::new();
    for path in names {
        let shard = Shard::read(&path)?;
        shard
            .check_hash(vocab.hash())
            .with_context(|| format!("shard {} does not match the vocabulary", path.display()))?;
        records.extend(shard.records);
    }
    Ok((vocab, records))
}
