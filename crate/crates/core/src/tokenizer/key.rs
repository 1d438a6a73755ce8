//! Key indices, scale membership and Krumhansl-Schmuckler key finding.
//!
//! Keys are numbered 0..24. Indices 0..12 are the major keys C..B by tonic.
//! Index `12 + m` is the relative minor of major key `m`, so 12 is A minor and
//! 23 is G# minor. A major key and its relative minor share a pitch-class set.

use crate::error::{Error, Result};
use crate::tokenizer::quantize::DURATION_GRID;
use crate::tokenizer::NoteEvent;

/// Krumhansl-Kessler probe-tone ratings, tonic first.
pub const MAJOR_PROFILE: [f64; 12] = [
    6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88,
];
pub const MINOR_PROFILE: [f64; 12] = [
    6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17,
];

const MAJOR_STEPS: [u8; 7] = [0, 2, 4, 5, 7, 9, 11];
const PITCH_NAMES: [&str; 12] = [
    "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
];

pub fn is_major(key: u8) -> bool {
    key < 12
}

/// Pitch class of the key's tonic.
pub fn tonic(key: u8) -> u8 {
    if is_major(key) {
        key
    } else {
        (key - 12 + 9) % 12
    }
}

/// The major key sharing this key's scale tones.
pub fn relative_major(key: u8) -> u8 {
    key % 12
}

pub fn key_from_tonic(tonic: u8, major: bool) -> u8 {
    if major {
        tonic % 12
    } else {
        12 + (tonic + 3) % 12
    }
}

/// Diatonic pitch-class membership for `key`.
pub fn scale_pitch_classes(key: u8) -> [bool; 12] {
    let root = relative_major(key);
    let mut set = [false; 12];
    for step in MAJOR_STEPS {
        set[((root + step) % 12) as usize] = true;
    }
    set
}

/// Names such as `Cmaj`, `F#min`.
pub fn key_name(key: u8) -> String {
    let suffix = if is_major(key) { "maj" } else { "min" };
    format!("{}{}", PITCH_NAMES[tonic(key) as usize], suffix)
}

/// Parses `Cmaj`, `Amin`, `Bbmaj`, `f#min`, `C`, `Am`.
pub fn parse_key_name(name: &str) -> Option<u8> {
    let lower = name.trim().to_ascii_lowercase();
    let mut chars = lower.chars();
    let letter = chars.next()?;
    let base: i32 = match letter {
        'c' => 0,
        'd' => 2,
        'e' => 4,
        'f' => 5,
        'g' => 7,
        'a' => 9,
        'b' => 11,
        _ => return None,
    };
    let mut rest = chars.as_str();
    let mut pc = base;
    if let Some(r) = rest.strip_prefix('#') {
        pc += 1;
        rest = r;
    } else if let Some(r) = rest.strip_prefix('b') {
        pc -= 1;
        rest = r;
    }
    let major = match rest {
        "" | "maj" | "major" => true,
        "m" | "min" | "minor" => false,
        _ => return None,
    };
    Some(key_from_tonic(pc.rem_euclid(12) as u8, major))
}

/// Duration-weighted pitch-class histogram.
pub fn pitch_class_histogram(notes: &[NoteEvent]) -> [f64; 12] {
    let mut hist = [0.0; 12];
    for n in notes {
        hist[(n.pitch % 12) as usize] += DURATION_GRID[n.duration as usize] as f64;
    }
    hist
}

fn pearson(x: &[f64; 12], y: &[f64; 12]) -> f64 {
    let mx = x.iter().sum::<f64>() / 12.0;
    let my = y.iter().sum::<f64>() / 12.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..12 {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Correlation of `hist` with each of the 24 key profiles.
pub fn key_correlations(hist: &[f64; 12]) -> [f64; 24] {
    let mut out = [0.0; 24];
    for (key, slot) in out.iter_mut().enumerate() {
        let key = key as u8;
        let base = if is_major(key) {
            &MAJOR_PROFILE
        } else {
            &MINOR_PROFILE
        };
        let t = tonic(key) as usize;
        let mut profile = [0.0; 12];
        for (pc, p) in profile.iter_mut().enumerate() {
            *p = base[(pc + 12 - t) % 12];
        }
        *slot = pearson(hist, &profile);
    }
    out
}

/// Key with the highest profile correlation. Ties go to the lower index,
/// which also prefers major keys over minor ones.
pub fn estimate_key(notes: &[NoteEvent]) -> Result<u8> {
    if notes.is_empty() {
        return Err(Error::EmptySequence);
    }
    let corr = key_correlations(&pitch_class_histogram(notes));
    let mut best = 0;
    for k in 1..24 {
        if corr[k] > corr[best] {
            best = k;
        }
    }
    Ok(best as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn notes_from(pcs: &[u8], octave_base: u8) -> Vec<NoteEvent> {
        pcs.iter()
            .enumerate()
            .map(|(i, &pc)| NoteEvent {
                instrument: 0,
                pitch: octave_base + pc,
                bar: 0,
                start: (i * 4 % 48) as u8,
                duration: 6,
                velocity: 8,
            })
            .collect()
    }

    /// Independent brute force: rotate the histogram rather than the profile
    /// and use the raw-sum form of the Pearson coefficient.
    fn oracle_key(notes: &[NoteEvent]) -> u8 {
        let mut hist = [0.0f64; 12];
        for n in notes {
            hist[(n.pitch % 12) as usize] += DURATION_GRID[n.duration as usize] as f64;
        }
        let corr = |x: &[f64], y: &[f64]| {
            let n = 12.0;
            let sx: f64 = x.iter().sum();
            let sy: f64 = y.iter().sum();
            let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            let sxx: f64 = x.iter().map(|a| a * a).sum();
            let syy: f64 = y.iter().map(|b| b * b).sum();
            (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
        };
        let mut best = (0u8, f64::NEG_INFINITY);
        for major in [true, false] {
            for t in 0..12u8 {
                let rotated: Vec<f64> = (0..12).map(|i| hist[(i + t as usize) % 12]).collect();
                let profile = if major { MAJOR_PROFILE } else { MINOR_PROFILE };
                let c = corr(&rotated, &profile);
                let key = key_from_tonic(t, major);
                if c > best.1 + 1e-12 || (c > best.1 - 1e-12 && key < best.0) {
                    best = (key, c);
                }
            }
        }
        best.0
    }

    #[test]
    fn c_major_scale_is_c_major() {
        let notes = notes_from(&[0, 2, 4, 5, 7, 9, 11], 48);
        assert_eq!(oracle_key(&notes), 0);
        assert_eq!(estimate_key(&notes).unwrap(), 0);
    }

    #[test]
    fn transposed_scale_is_g_major() {
        let notes = notes_from(&[7, 9, 11, 12, 14, 16, 18], 48);
        assert_eq!(oracle_key(&notes), 7);
        assert_eq!(estimate_key(&notes).unwrap(), 7);
    }

    #[test]
    fn harmonic_minor_arpeggio_is_a_minor() {
        let pcs: Vec<u8> = [9, 12, 16, 20].repeat(4);
        let notes = notes_from(&pcs, 36);
        assert_eq!(oracle_key(&notes), 12);
        assert_eq!(estimate_key(&notes).unwrap(), 12);
        assert!(!is_major(12));
        assert_eq!(tonic(12), 9);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(estimate_key(&[]), Err(Error::EmptySequence)));
    }

    #[test]
    fn relative_keys_share_scale_tones() {
        for m in 0..12u8 {
            assert_eq!(scale_pitch_classes(m), scale_pitch_classes(m + 12));
            assert_eq!((tonic(m + 12) + 3) % 12, m);
        }
        let c = scale_pitch_classes(0);
        let expected = [
            true, false, true, false, true, true, false, true, false, true, false, true,
        ];
        assert_eq!(c, expected);
    }

    #[test]
    fn key_names_round_trip() {
        for k in 0..24u8 {
            assert_eq!(parse_key_name(&key_name(k)), Some(k));
        }
        assert_eq!(parse_key_name("Cmaj"), Some(0));
        assert_eq!(parse_key_name("Amin"), Some(12));
        assert_eq!(parse_key_name("Bbmaj"), Some(10));
        assert_eq!(parse_key_name("Ebm"), Some(key_from_tonic(3, false)));
        assert_eq!(parse_key_name("H"), None);
    }
}
