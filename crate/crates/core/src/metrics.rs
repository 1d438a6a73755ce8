//! Token, Note, Bar and Key Error on generated token streams.
//!
//! All metrics work on the generated order. Nothing is re-sorted, since the
//! ordering mistakes are exactly what Note Error measures.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::key::scale_pitch_classes;
use crate::tokenizer::{scan_notes, NoteEvent, TokenSequence, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub token_error: usize,
    pub note_error: usize,
    /// In bars, at 48th-note resolution.
    pub bar_error: f64,
    /// Percentage of notes outside the requested key.
    pub key_error: f64,
    pub note_count: usize,
}

/// Tokens after the meta prefix that the note scanner had to skip.
pub fn token_error(seq: &TokenSequence, vocab: &Vocabulary) -> usize {
    scan_notes(seq, vocab).skipped
}

/// Counts ordering faults between consecutive notes. A pair counts at most
/// once; the checks run in the order same-note, bar regression, start
/// regression.
pub fn note_error(notes: &[NoteEvent]) -> usize {
    notes
        .windows(2)
        .filter(|pair| {
            let (a, b) = (&pair[0], &pair[1]);
            let same_note = a.instrument == b.instrument
                && a.pitch == b.pitch
                && a.bar == b.bar
                && a.start == b.start;
            same_note || a.bar > b.bar || (a.bar == b.bar && a.start > b.start)
        })
        .count()
}

/// Distance in bars between where the last note ends and the requested
/// length. With no notes the whole requested length is missing.
pub fn bar_error_notes(notes: &[NoteEvent], requested_bars: u32) -> f64 {
    match notes.last() {
        None => requested_bars as f64,
        Some(last) => {
            let target = 48 * requested_bars as i64;
            (last.end_units() as i64 - target).abs() as f64 / 48.0
        }
    }
}

pub fn bar_error(seq: &TokenSequence, vocab: &Vocabulary, requested_bars: u32) -> f64 {
    bar_error_notes(&scan_notes(seq, vocab).notes, requested_bars)
}

/// Percentage of notes whose pitch class lies outside `key`'s scale.
/// A minor key uses its relative major's scale tones.
pub fn key_error(notes: &[NoteEvent], key: u8) -> f64 {
    if notes.is_empty() {
        return 0.0;
    }
    let scale = scale_pitch_classes(key);
    let outside = notes
        .iter()
        .filter(|n| !scale[(n.pitch % 12) as usize])
        .count();
    100.0 * outside as f64 / notes.len() as f64
}

/// All four metrics for one generated piece.
pub fn evaluate(
    seq: &TokenSequence,
    vocab: &Vocabulary,
    requested_bars: u32,
    key: u8,
) -> EvalReport {
    let scan = scan_notes(seq, vocab);
    EvalReport {
        token_error: scan.skipped,
        note_error: note_error(&scan.notes),
        bar_error: bar_error_notes(&scan.notes, requested_bars),
        key_error: key_error(&scan.notes, key),
        note_count: scan.notes.len(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub median: f64,
}

impl Stat {
    fn of(mut values: Vec<f64>) -> Stat {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        values.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            values[n / 2]
        } else {
            (values[n / 2 - 1] + values[n / 2]) / 2.0
        };
        Stat { mean, median }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub pieces: usize,
    pub token: Stat,
    pub note: Stat,
    pub bar: Stat,
    pub key: Stat,
}

pub fn aggregate(reports: &[EvalReport]) -> Result<CorpusSummary> {
    if reports.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let column = |f: fn(&EvalReport) -> f64| Stat::of(reports.iter().map(f).collect());
    Ok(CorpusSummary {
        pieces: reports.len(),
        token: column(|r| r.token_error as f64),
        note: column(|r| r.note_error as f64),
        bar: column(|r| r.bar_error),
        key: column(|r| r.key_error),
    })
}

impl CorpusSummary {
    fn rows(&self) -> [(&'static str, Stat); 4] {
        [
            ("Token", self.token),
            ("Note", self.note),
            ("Bar", self.bar),
            ("Key", self.key),
        ]
    }

    /// `metric,statistic,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,statistic,value\n");
        for (name, stat) in self.rows() {
            let _ = writeln!(out, "{name},mean,{:.4}", stat.mean);
            let _ = writeln!(out, "{name},median,{:.4}", stat.median);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{:<8}{:<10}{:>10}\n", "Metric", "Stat", "Value");
        for (name, stat) in self.rows() {
            let _ = writeln!(out, "{:<8}{:<10}{:>10.2}", name, "mean", stat.mean);
            let _ = writeln!(out, "{:<8}{:<10}{:>10.2}", "", "median", stat.median);
        }
        let _ = writeln!(out, "pieces: {}", self.pieces);
        out
    }
}
