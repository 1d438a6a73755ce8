use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use musattn::model::{load_checkpoint, save_checkpoint, ModelConfig, Objective, TrainConfig, Trainer};
use serde::{Deserialize, Serialize};

use super::preprocess::load_dataset;
use crate::config::{load_config, set, MaskArgs};
use crate::fsutil::{write_atomic, write_json};

/// Set by the interrupt handler; the training loop stops at the next step
/// boundary and writes a final checkpoint.
pub static STOP: AtomicBool = AtomicBool::new(false);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub layers: usize,
    pub d_model: usize,
    pub heads: usize,
    pub ffn_dims: (usize, usize),
    pub max_len: usize,
    /// Defaults to `max_len`.
    pub rel_window: Option<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        ModelSection {
            layers: m.layers,
            d_model: m.d_model,
            heads: m.heads,
            ffn_dims: m.ffn_dims,
            max_len: m.max_len,
            rel_window: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainCommandConfig {
    pub data: PathBuf,
    pub out: PathBuf,
    pub steps: u64,
    pub checkpoint_every: u64,
    pub resume: Option<PathBuf>,
    pub model: ModelSection,
    pub train: TrainConfig,
}

impl Default for TrainCommandConfig {
    fn default() -> Self {
        TrainCommandConfig {
            data: PathBuf::from("data"),
            out: PathBuf::from("runs"),
            steps: 1000,
            checkpoint_every: 500,
            resume: None,
            model: ModelSection::default(),
            train: TrainConfig::default(),
        }
    }
}

impl TrainCommandConfig {
    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            layers: self.model.layers,
            d_model: self.model.d_model,
            heads: self.model.heads,
            ffn_dims: self.model.ffn_dims,
            vocab_size,
            max_len: self.model.max_len,
            rel_window: self.model.rel_window.unwrap_or(self.model.max_len),
        }
    }
}

fn parse_ffn(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected two comma-separated sizes, got {s:?}"))?;
    let p = |x: &str| x.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok((p(a)?, p(b)?))
}

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    /// Directory written by `preprocess`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Run directory for checkpoints and the training log.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Train until this many optimizer steps have been taken.
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// Continue from a checkpoint; model and training settings come from it.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    d_model: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    /// Hidden sizes of the feed-forward block, e.g. `512,256`.
    #[arg(long, value_parser = parse_ffn)]
    ffn: Option<(usize, usize)>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    rel_window: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    warmup: Option<u64>,
    /// Clip the global gradient norm to this value.
    #[arg(long)]
    clip: Option<f64>,
    #[command(flatten)]
    mask: MaskArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_objective)]
    objective: Option<Objective>,
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    match s {
        "next" => Ok(Objective::Next),
        "mlm" => Ok(Objective::Mlm),
        other => Err(format!("unknown objective {other:?} (next, mlm)")),
    }
}

impl TrainArgs {
    pub fn resolve(&self, file: Option<&Path>) -> Result<TrainCommandConfig> {
        let mut c: TrainCommandConfig = load_config(file)?;
        set(&mut c.data, &self.data);
        set(&mut c.out, &self.out);
        set(&mut c.steps, &self.steps);
        set(&mut c.checkpoint_every, &self.checkpoint_every);
        if self.resume.is_some() {
            c.resume = self.resume.clone();
        }
        set(&mut c.model.layers, &self.layers);
        set(&mut c.model.d_model, &self.d_model);
        set(&mut c.model.heads, &self.heads);
        set(&mut c.model.ffn_dims, &self.ffn);
        set(&mut c.model.max_len, &self.max_len);
        if self.rel_window.is_some() {
            c.model.rel_window = self.rel_window;
        }
        set(&mut c.train.batch_size, &self.batch_size);
        set(&mut c.train.adam.lr, &self.lr);
        set(&mut c.train.adam.warmup_steps, &self.warmup);
        if self.clip.is_some() {
            c.train.adam.clip_norm = self.clip;
        }
        self.mask.apply(&mut c.train.mask);
        set(&mut c.train.seed, &self.seed);
        set(&mut c.train.objective, &self.objective);
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub start_step: u64,
    pub final_step: u64,
    pub final_loss: Option<f64>,
    pub final_accuracy: Option<f64>,
    pub interrupted: bool,
    pub checkpoints: Vec<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub step: u64,
    pub loss: f64,
    pub accuracy: f64,
    pub wall_ms: u64,
}

pub const LOG_HEADER: &str = "step,loss,accuracy,wall_ms";

pub fn read_log(path: &Path) -> Result<Vec<LogRow>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            bail!("{}:{}: expected 4 fields", path.display(), i + 1);
        }
        let ctx = || format!("{}:{}", path.display(), i + 1);
        rows.push(LogRow {
            step: f[0].parse().with_context(ctx)?,
            loss: f[1].parse().with_context(ctx)?,
            accuracy: f[2].parse().with_context(ctx)?,
            wall_ms: f[3].parse().with_context(ctx)?,
        });
    }
    Ok(rows)
}

fn render_log(rows: &[LogRow]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{:.6},{:.6},{}", r.step, r.loss, r.accuracy, r.wall_ms);
    }
    out
}

pub fn run(cfg: &TrainCommandConfig) -> Result<TrainSummary> {
    let (vocab, records) = load_dataset(&cfg.data)?;
    let log_path = cfg.out.join("train_log.csv");

    let (mut trainer, mut rows) = match &cfg.resume {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            if ckpt.header.max_bars != vocab.max_bars() {
                bail!(
                    "checkpoint was trained with max_bars {} but the data uses {}",
                    ckpt.header.max_bars,
                    vocab.max_bars()
                );
            }
            if ckpt.header.train.mask != cfg.train.mask {
                log::info!("resuming with the checkpoint's mask {:?}", ckpt.header.train.mask);
            }
            let step = ckpt.header.step;
            let trainer = Trainer::from_checkpoint(ckpt, vocab)?;
            let mut rows = if log_path.exists() { read_log(&log_path)? } else { Vec::new() };
            rows.retain(|r| r.step <= step);
            (trainer, rows)
        }
        None => {
            let model_cfg = cfg.model_config(vocab.size());
            model_cfg.validate()?;
            (Trainer::new(model_cfg, cfg.train.clone(), vocab)?, Vec::new())
        }
    };

    let max_len = trainer.model.config.max_len;
    if let Some(long) = records.iter().find(|r| r.len() > max_len) {
        bail!(
            "a record has {} tokens but the model accepts at most {max_len}; preprocess with --max-len {max_len}",
            long.len()
        );
    }

    std::fs::create_dir_all(&cfg.out)?;
    let mut echoed = cfg.clone();
    echoed.train = trainer.config.clone();
    write_json(&cfg.out.join("config.json"), &echoed)?;

    let start_step = trainer.step();
    let mut summary = TrainSummary {
        start_step,
        final_step: start_step,
        final_loss: None,
        final_accuracy: None,
        interrupted: false,
        checkpoints: Vec::new(),
    };
    let offset_ms = rows.last().map_or(0, |r| r.wall_ms);
    let clock = Instant::now();
    while trainer.step() < cfg.steps {
        if STOP.load(Ordering::SeqCst) {
            summary.interrupted = true;
            log::warn!("interrupted at step {}", trainer.step());
            break;
        }
        let batch = trainer.sample_batch(&records)?;
        let stats = trainer.train_step(&batch)?;
        if !stats.loss.is_finite() || !trainer.model.params.is_finite() {
            bail!("training diverged at step {}", stats.step);
        }
        rows.push(LogRow {
            step: stats.step,
            loss: stats.loss,
            accuracy: stats.accuracy,
            wall_ms: offset_ms + clock.elapsed().as_millis() as u64,
        });
        summary.final_loss = Some(stats.loss);
        summary.final_accuracy = Some(stats.accuracy);
        log::info!(
            "step {} loss {:.4} acc {:.3} lr {:.2e}",
            stats.step,
            stats.loss,
            stats.accuracy,
            stats.lr
        );
        if cfg.checkpoint_every > 0 && stats.step % cfg.checkpoint_every == 0 {
            let path = cfg.out.join(format!("step-{}.ckpt", stats.step));
            save_checkpoint(&trainer.checkpoint(), &path)?;
            write_atomic(&log_path, render_log(&rows).as_bytes())?;
            summary.checkpoints.push(path);
        }
    }

    let path = cfg.out.join("final.ckpt");
    save_checkpoint(&trainer.checkpoint(), &path)?;
    summary.checkpoints.push(path);
    write_atomic(&log_path, render_log(&rows).as_bytes())?;
    summary.final_step = trainer.step();
    Ok(summary)
}
