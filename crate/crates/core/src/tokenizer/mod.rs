//! MIDI to token stream and back.
//!
//! A piece becomes `[B, K, T, N1, ..., Nn]`: three meta tokens (bar count,
//! key, tempo bin) followed by six tokens per note in the order instrument,
//! pitch, bar, start, duration, velocity.

pub mod key;
pub mod quantize;
pub mod shard;
pub mod vocab;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::midi::{strip_drums, MidiNote, MidiSong, TempoEvent};
use quantize::{
    class_to_program, fold_pitch, map_program_to_class, quantize_duration, quantize_start,
    quantize_tempo, quantize_velocity, tempo_from_bin, velocity_from_bin, DURATION_GRID,
    LOWEST_PITCH,
};
pub use vocab::{Role, Vocabulary};

/// Ticks per quarter note used when rebuilding MIDI from tokens.
pub const DECODE_TICKS_PER_QUARTER: u16 = 480;
pub const META_LEN: usize = 3;
pub const NOTE_LEN: usize = 6;

/// One quantized note.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NoteEvent {
    pub instrument: u8,
    /// Index in C0..=B6, so `pitch % 12` is the pitch class.
    pub pitch: u8,
    pub bar: u32,
    /// Offset within the bar on a 48-step grid.
    pub start: u8,
    /// Index into [`quantize::DURATION_GRID`].
    pub duration: u8,
    pub velocity: u8,
}

impl NoteEvent {
    /// Token values in emission order.
    pub fn values(&self) -> [u32; 6] {
        [
            self.instrument as u32,
            self.pitch as u32,
            self.bar,
            self.start as u32,
            self.duration as u32,
            self.velocity as u32,
        ]
    }

    fn sort_key(&self) -> (u32, u8, u8, u8, u8, u8) {
        (
            self.bar,
            self.start,
            self.instrument,
            self.pitch,
            self.duration,
            self.velocity,
        )
    }

    /// End position in 48th-note units from the start of the piece.
    pub fn end_units(&self) -> u64 {
        48 * self.bar as u64 + self.start as u64 + DURATION_GRID[self.duration as usize] as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaInfo {
    pub bar_count: u32,
    pub key: u8,
    pub tempo_bin: u8,
}

impl MetaInfo {
    pub fn new(bar_count: u32, key: u8, bpm: f64) -> Self {
        MetaInfo {
            bar_count,
            key,
            tempo_bin: quantize_tempo(bpm),
        }
    }

    pub fn tokens(&self, vocab: &Vocabulary) -> [u32; 3] {
        [
            vocab.token(Role::MetaB, self.bar_count - 1),
            vocab.token(Role::MetaK, self.key as u32),
            vocab.token(Role::MetaT, self.tempo_bin as u32),
        ]
    }
}

/// Token ids with their roles.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub roles: Vec<Role>,
}

impl TokenSequence {
    pub fn from_ids(ids: Vec<u32>, vocab: &Vocabulary) -> Result<Self> {
        let roles = ids
            .iter()
            .map(|&id| {
                vocab.role(id).ok_or(Error::IdOutOfRange {
                    id,
                    vocab_size: vocab.size(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TokenSequence { ids, roles })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn push(&mut self, id: u32, role: Role) {
        self.ids.push(id);
        self.roles.push(role);
    }

    /// Number of leading meta tokens (at most three, in B, K, T order).
    pub fn meta_prefix_len(&self) -> usize {
        self.roles
            .iter()
            .zip(Role::META)
            .take_while(|(a, b)| *a == b)
            .count()
    }

    /// Reads the meta prefix back, if complete.
    pub fn meta(&self, vocab: &Vocabulary) -> Option<MetaInfo> {
        if self.meta_prefix_len() < META_LEN {
            return None;
        }
        let value = |i: usize| vocab.decode(self.ids[i]).map(|(_, v)| v).unwrap_or(0);
        Some(MetaInfo {
            bar_count: value(0) + 1,
            key: value(1) as u8,
            tempo_bin: value(2) as u8,
        })
    }
}

/// Builds the token stream for already-quantized notes.
pub fn encode_notes(meta: &MetaInfo, notes: &[NoteEvent], vocab: &Vocabulary) -> TokenSequence {
    let mut seq = TokenSequence::default();
    for (role, id) in Role::META.iter().zip(meta.tokens(vocab)) {
        seq.push(id, *role);
    }
    for note in notes {
        for (role, value) in Role::NOTE.iter().zip(note.values()) {
            seq.push(vocab.token(*role, value), *role);
        }
    }
    seq
}

/// Quantizes every non-drum note of `song` and derives its meta information.
///
/// Notes are sorted by (bar, start, instrument, pitch) and exact duplicates
/// are removed. Notes at or past `bars_limit` (or the vocabulary's bar
/// capacity) are dropped.
pub fn quantize_song(
    song: &MidiSong,
    vocab: &Vocabulary,
    bars_limit: Option<u32>,
) -> Result<(MetaInfo, Vec<NoteEvent>)> {
    let song = strip_drums(song);
    let bar_ticks = song.bar_ticks();
    let capacity = vocab.max_bars() as u32;
    let limit = bars_limit.map_or(capacity, |l| l.min(capacity));

    let mut over_capacity = 0usize;
    let mut notes: Vec<NoteEvent> = Vec::with_capacity(song.note_count());
    for n in song.notes() {
        let bar = n.onset_ticks / bar_ticks;
        if bar >= limit {
            if bar >= capacity {
                over_capacity += 1;
            }
            continue;
        }
        notes.push(quantize_note(n, bar, bar_ticks, song.ticks_per_quarter));
    }
    if over_capacity > 0 {
        log::warn!("dropped {over_capacity} note(s) beyond bar {capacity}");
    }
    if notes.is_empty() {
        return Err(Error::EmptySequence);
    }
    notes.sort_by_key(NoteEvent::sort_key);
    notes.dedup();

    let bar_count = notes.iter().map(|n| n.bar).max().unwrap_or(0) + 1;
    let meta = MetaInfo {
        bar_count,
        key: key::estimate_key(&notes)?,
        tempo_bin: quantize_tempo(song.initial_bpm()),
    };
    Ok((meta, notes))
}

fn quantize_note(n: &MidiNote, bar: u32, bar_ticks: u32, tpq: u16) -> NoteEvent {
    NoteEvent {
        instrument: map_program_to_class(n.program),
        pitch: fold_pitch(n.pitch),
        bar,
        start: quantize_start(n.onset_ticks - bar * bar_ticks, bar_ticks),
        duration: quantize_duration(n.duration_ticks, tpq),
        velocity: quantize_velocity(n.velocity),
    }
}

pub fn encode_song(
    song: &MidiSong,
    vocab: &Vocabulary,
    bars_limit: Option<u32>,
) -> Result<(MetaInfo, TokenSequence)> {
    let (meta, notes) = quantize_song(song, vocab, bars_limit)?;
    let seq = encode_notes(&meta, &notes, vocab);
    Ok((meta, seq))
}

/// Outcome of scanning a token stream for complete notes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScanResult {
    pub notes: Vec<NoteEvent>,
    /// Tokens after the meta prefix that belong to no complete note.
    pub skipped: usize,
}

/// Greedy left-to-right note scanner.
///
/// At each position the next six roles either read exactly
/// INSTR PITCH BAR START DUR VEL, in which case they form a note and the scan
/// jumps past them, or they do not, in which case one token is skipped and
/// counted. Notes are returned in stream order.
pub fn scan_notes(seq: &TokenSequence, vocab: &Vocabulary) -> ScanResult {
    let mut out = ScanResult::default();
    let mut pos = seq.meta_prefix_len();
    let n = seq.len();
    while pos < n {
        let window_ok = pos + NOTE_LEN <= n && seq.roles[pos..pos + NOTE_LEN] == Role::NOTE;
        if !window_ok {
            out.skipped += 1;
            pos += 1;
            continue;
        }
        let v = |i: usize| vocab.decode(seq.ids[pos + i]).map(|(_, v)| v).unwrap_or(0);
        out.notes.push(NoteEvent {
            instrument: v(0) as u8,
            pitch: v(1) as u8,
            bar: v(2),
            start: v(3) as u8,
            duration: v(4) as u8,
            velocity: v(5) as u8,
        });
        pos += NOTE_LEN;
    }
    out
}

/// Rebuilds MIDI from a token stream at 480 ticks per quarter in 4/4.
pub fn decode_tokens(seq: &TokenSequence, vocab: &Vocabulary) -> MidiSong {
    decode_with_report(seq, vocab).0
}

/// Like [`decode_tokens`], also returning the number of skipped tokens.
pub fn decode_with_report(seq: &TokenSequence, vocab: &Vocabulary) -> (MidiSong, usize) {
    let scan = scan_notes(seq, vocab);
    let mut song = notes_to_song(&scan.notes);
    if let Some(meta) = seq.meta(vocab) {
        song.tempo_events = vec![TempoEvent {
            tick: 0,
            micros_per_quarter: (60_000_000.0 / tempo_from_bin(meta.tempo_bin)).round() as u32,
        }];
    }
    (song, scan.skipped)
}

/// Places quantized notes on a 480-tpq, 4/4 timeline.
pub fn notes_to_song(notes: &[NoteEvent]) -> MidiSong {
    let tpq = DECODE_TICKS_PER_QUARTER;
    let unit = tpq as u32 / 12;
    let bar_ticks = 48 * unit;
    let mut song = MidiSong::new(tpq);
    song.tracks = vec![notes
        .iter()
        .map(|n| MidiNote {
            program: class_to_program(n.instrument),
            channel: if n.instrument >= 9 { 10 } else { n.instrument },
            pitch: n.pitch + LOWEST_PITCH,
            onset_ticks: n.bar * bar_ticks + n.start as u32 * unit,
            duration_ticks: DURATION_GRID[n.duration as usize] * unit,
            velocity: velocity_from_bin(n.velocity),
        })
        .collect()];
    song.canonicalize();
    song
}

/// Splits a piece into training segments of at most `max_len` tokens.
///
/// Every segment repeats the meta prefix and cuts only at note boundaries.
pub fn segment(seq: &TokenSequence, max_len: usize) -> Vec<TokenSequence> {
    assert!(max_len >= META_LEN + NOTE_LEN, "max_len must fit one note");
    let prefix = seq.meta_prefix_len();
    let body_ids = &seq.ids[prefix..];
    let body_roles = &seq.roles[prefix..];
    let per_segment = (max_len - prefix) / NOTE_LEN * NOTE_LEN;
    if body_ids.is_empty() {
        return vec![seq.clone()];
    }
    body_ids
        .chunks(per_segment)
        .zip(body_roles.chunks(per_segment))
        .map(|(ids, roles)| {
            let mut s = TokenSequence {
                ids: seq.ids[..prefix].to_vec(),
                roles: seq.roles[..prefix].to_vec(),
            };
            s.ids.extend_from_slice(ids);
            s.roles.extend_from_slice(roles);
            s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::MidiNote;

    fn quarter_c4() -> MidiSong {
        let mut song = MidiSong::new(480);
        song.tracks = vec![vec![MidiNote {
            program: 0,
            channel: 0,
            pitch: 60,
            onset_ticks: 0,
            duration_ticks: 480,
            velocity: 100,
        }]];
        song
    }

    fn note(pitch: u8, bar: u32, start: u8) -> NoteEvent {
        NoteEvent {
            instrument: 0,
            pitch,
            bar,
            start,
            duration: 6,
            velocity: 9,
        }
    }

    #[test]
    fn single_quarter_note_encoding() {
        let vocab = Vocabulary::default();
        let (meta, seq) = encode_song(&quarter_c4(), &vocab, None).unwrap();
        assert_eq!(meta.bar_count, 1);
        assert_eq!(meta.tempo_bin, 7);
        let key = key::estimate_key(&[NoteEvent {
            instrument: 0,
            pitch: 48,
            bar: 0,
            start: 0,
            duration: 6,
            velocity: quantize_velocity(100),
        }])
        .unwrap();
        let expected = vec![
            vocab.token(Role::MetaB, 0),
            vocab.token(Role::MetaK, key as u32),
            vocab.token(Role::MetaT, 7),
            vocab.token(Role::Instr, 0),
            vocab.token(Role::Pitch, 48),
            vocab.token(Role::Bar, 0),
            vocab.token(Role::Start, 0),
            vocab.token(Role::Dur, 6),
            vocab.token(Role::Vel, quantize_velocity(100) as u32),
        ];
        assert_eq!(seq.ids, expected);
        assert_eq!(seq.meta(&vocab), Some(meta));
    }

    #[test]
    fn duplicates_after_quantization_collapse() {
        let mut song = quarter_c4();
        let mut twin = song.tracks[0][0];
        twin.onset_ticks = 3; // same 48-grid slot
        twin.channel = 1;
        song.tracks[0].push(twin);
        let (_, notes) = quantize_song(&song, &Vocabulary::default(), None).unwrap();
        assert_eq!(notes.len(), 1);
    }

    #[test]
    fn bar_count_is_last_bar_plus_one() {
        let mut song = MidiSong::new(480);
        song.tracks = vec![(0..16)
            .map(|bar| MidiNote {
                program: 0,
                channel: 0,
                pitch: 60 + (bar % 5) as u8,
                onset_ticks: bar * 1920 + 480,
                duration_ticks: 240,
                velocity: 80,
            })
            .collect()];
        let (meta, seq) = encode_song(&song, &Vocabulary::default(), None).unwrap();
        assert_eq!(meta.bar_count, 16);
        assert_eq!(seq.len(), 3 + 16 * 6);
        let (limited, _) = encode_song(&song, &Vocabulary::default(), Some(4)).unwrap();
        assert_eq!(limited.bar_count, 4);
    }

    #[test]
    fn drum_only_song_is_empty() {
        let mut song = quarter_c4();
        song.tracks[0][0].channel = 9;
        assert!(matches!(
            encode_song(&song, &Vocabulary::default(), None),
            Err(Error::EmptySequence)
        ));
    }

    #[test]
    fn out_of_range_pitches_fold_by_octave() {
        let mut song = quarter_c4();
        song.tracks[0][0].pitch = 110; // D8
        let (_, notes) = quantize_song(&song, &Vocabulary::default(), None).unwrap();
        assert_eq!(notes[0].pitch, 110 - 24 - 12);
    }

    fn three_notes(vocab: &Vocabulary) -> TokenSequence {
        let meta = MetaInfo::new(4, 0, 120.0);
        encode_notes(&meta, &[note(48, 0, 0), note(50, 1, 0), note(52, 2, 0)], vocab)
    }

    #[test]
    fn scanner_on_clean_sequence() {
        let vocab = Vocabulary::default();
        let seq = three_notes(&vocab);
        let scan = scan_notes(&seq, &vocab);
        assert_eq!(scan.notes.len(), 3);
        assert_eq!(scan.skipped, 0);
        assert_eq!(decode_tokens(&seq, &vocab).note_count(), 3);
    }

    #[test]
    fn scanner_with_deleted_pitch() {
        let vocab = Vocabulary::default();
        let mut seq = three_notes(&vocab);
        // second note's PITCH sits at 3 + 6 + 1
        seq.ids.remove(10);
        seq.roles.remove(10);
        let (song, skipped) = decode_with_report(&seq, &vocab);
        assert_eq!(song.note_count(), 2);
        assert_eq!(skipped, 5);
    }

    #[test]
    fn decode_encode_recovers_quantized_notes() {
        let vocab = Vocabulary::default();
        let mut song = MidiSong::new(384);
        song.tempo_events[0].micros_per_quarter = 750_000; // 80 BPM
        song.tracks = vec![
            vec![
                MidiNote { program: 0, channel: 0, pitch: 60, onset_ticks: 0, duration_ticks: 384, velocity: 64 },
                MidiNote { program: 0, channel: 0, pitch: 67, onset_ticks: 1536 + 96, duration_ticks: 96, velocity: 110 },
            ],
            vec![MidiNote { program: 33, channel: 1, pitch: 28, onset_ticks: 768, duration_ticks: 1536, velocity: 50 }],
        ];
        let (meta, seq) = encode_song(&song, &vocab, None).unwrap();
        let decoded = decode_tokens(&seq, &vocab);
        let (meta2, notes2) = quantize_song(&decoded, &vocab, None).unwrap();
        let (_, notes) = quantize_song(&song, &vocab, None).unwrap();
        assert_eq!(notes2, notes);
        assert_eq!(meta2, meta);
    }

    #[test]
    fn segmentation_examples() {
        let vocab = Vocabulary::default();
        let meta = MetaInfo::new(200, 0, 100.0);
        let notes: Vec<NoteEvent> = (0..400).map(|i| note(40 + (i % 12) as u8, i / 2, 0)).collect();
        let seq = encode_notes(&meta, &notes, &vocab);
        assert_eq!(seq.len(), 2403);
        let parts = segment(&seq, 2048);
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].len(), 3 + 2040);
        assert_eq!(parts[1].len(), 3 + 60 * 6);
        let rejoined: Vec<u32> = parts.iter().flat_map(|p| p.ids[3..].to_vec()).collect();
        assert_eq!(rejoined, seq.ids[3..].to_vec());
        for p in &parts {
            assert_eq!(p.ids[..3], seq.ids[..3]);
        }

        let short = encode_notes(&meta, &notes[..10], &vocab);
        assert_eq!(segment(&short, 2048), vec![short.clone()]);
    }
}
