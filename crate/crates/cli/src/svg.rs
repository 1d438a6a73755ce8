//! Minimal SVG writers for piano rolls and probability heatmaps.

use std::fmt::Write as _;

use musattn::tokenizer::quantize::DURATION_GRID;
use musattn::tokenizer::NoteEvent;

const UNIT: f64 = 2.0;
const ROW: f64 = 4.0;
const MARGIN: f64 = 20.0;

fn instrument_color(class: u8) -> &'static str {
    const COLORS: [&str; 10] = [
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
        "#bcbd22", "#17becf",
    ];
    COLORS[class as usize % COLORS.len()]
}

/// Notes on a time/pitch grid, one 48th of a bar per `UNIT` pixels, with
/// bar lines. Pitch 0 sits at the bottom.
pub fn pianoroll(notes: &[NoteEvent], bars: u32) -> String {
    let end_units = notes
        .iter()
        .map(|n| n.end_units())
        .max()
        .unwrap_or(0)
        .max(48 * bars as u64);
    let (lo, hi) = notes
        .iter()
        .fold((u8::MAX, 0u8), |(lo, hi), n| (lo.min(n.pitch), hi.max(n.pitch)));
    let (lo, hi) = if notes.is_empty() { (36, 60) } else { (lo.saturating_sub(2), hi + 2) };
    let width = end_units as f64 * UNIT + 2.0 * MARGIN;
    let height = (hi - lo + 1) as f64 * ROW + 2.0 * MARGIN;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let bar_count = end_units.div_ceil(48);
    for b in 0..=bar_count {
        let x = MARGIN + (b * 48) as f64 * UNIT;
        let _ = writeln!(
            out,
            r##"<line x1="{x}" y1="{MARGIN}" x2="{x}" y2="{}" stroke="#ccc" stroke-width="1"/>"##,
            height - MARGIN
        );
    }
    for n in notes {
        let x = MARGIN + (48 * n.bar as u64 + n.start as u64) as f64 * UNIT;
        let w = DURATION_GRID[n.duration as usize % DURATION_GRID.len()] as f64 * UNIT;
        let y = MARGIN + (hi - n.pitch) as f64 * ROW;
        let _ = writeln!(
            out,
            r#"<rect x="{x}" y="{y}" width="{w}" height="{ROW}" fill="{}" fill-opacity="{:.2}"/>"#,
            instrument_color(n.instrument),
            0.35 + 0.65 * n.velocity as f64 / 15.0
        );
    }
    out.push_str("</svg>\n");
    out
}

/// `values[row][col]` in `[0, 1]` as grey cells, darker is larger. Row 0 is
/// drawn at the top.
pub fn heatmap(values: &[Vec<f64>], title: &str) -> String {
    let rows = values.len();
    let cols = values.first().map_or(0, Vec::len);
    let cell = 6.0;
    let width = cols as f64 * cell + 2.0 * MARGIN;
    let height = rows as f64 * cell + 2.0 * MARGIN;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="14" font-size="12">{title}</text>"#);
    for (r, row) in values.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let shade = (255.0 * (1.0 - v.clamp(0.0, 1.0))).round() as u8;
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},{shade})"/>"#,
                MARGIN + c as f64 * cell,
                MARGIN + r as f64 * cell
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
