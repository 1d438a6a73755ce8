//! Standard MIDI File reading and writing.
//!
//! Only what the tokenizer needs is kept: notes with absolute tick timing,
//! tempo changes and time signatures. Controllers, pitch bend and SysEx are
//! skipped on read. Formats 0 and 1 are accepted; format 2 is rejected.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channel index of General MIDI percussion (channel 10, zero based).
pub const DRUM_CHANNEL: u8 = 9;
pub const DEFAULT_MICROS_PER_QUARTER: u32 = 500_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MidiNote {
    pub program: u8,
    pub channel: u8,
    pub pitch: u8,
    pub onset_ticks: u32,
    pub duration_ticks: u32,
    pub velocity: u8,
}

impl MidiNote {
    pub fn end_ticks(&self) -> u32 {
        self.onset_ticks + self.duration_ticks
    }

    fn canonical_key(&self) -> (u32, u8, u8, u32, u8, u8) {
        (
            self.onset_ticks,
            self.channel,
            self.pitch,
            self.duration_ticks,
            self.velocity,
            self.program,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TempoEvent {
    pub tick: u32,
    pub micros_per_quarter: u32,
}

impl TempoEvent {
    pub fn bpm(&self) -> f64 {
        60_000_000.0 / self.micros_per_quarter as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSignature {
    pub tick: u32,
    pub numerator: u8,
    /// Actual denominator (4 for x/4), not the power-of-two exponent.
    pub denominator: u8,
}

/// A parsed Standard MIDI File.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MidiSong {
    pub ticks_per_quarter: u16,
    pub tempo_events: Vec<TempoEvent>,
    pub time_signatures: Vec<TimeSignature>,
    pub tracks: Vec<Vec<MidiNote>>,
}

impl MidiSong {
    /// An empty song at 120 BPM in 4/4.
    pub fn new(ticks_per_quarter: u16) -> Self {
        MidiSong {
            ticks_per_quarter,
            tempo_events: vec![TempoEvent {
                tick: 0,
                micros_per_quarter: DEFAULT_MICROS_PER_QUARTER,
            }],
            time_signatures: vec![TimeSignature {
                tick: 0,
                numerator: 4,
                denominator: 4,
            }],
            tracks: Vec::new(),
        }
    }

    pub fn notes(&self) -> impl Iterator<Item = &MidiNote> {
        self.tracks.iter().flatten()
    }

    pub fn note_count(&self) -> usize {
        self.tracks.iter().map(Vec::len).sum()
    }

    /// Tempo in effect at tick 0.
    pub fn initial_bpm(&self) -> f64 {
        self.tempo_events
            .first()
            .map(TempoEvent::bpm)
            .unwrap_or(120.0)
    }

    /// Length of one bar in ticks under the time signature at tick 0.
    pub fn bar_ticks(&self) -> u32 {
        let (num, den) = self
            .time_signatures
            .first()
            .map(|ts| (ts.numerator as u32, ts.denominator as u32))
            .unwrap_or((4, 4));
        (self.ticks_per_quarter as u32 * 4 * num / den.max(1)).max(1)
    }

    /// Regroups notes into one track per program (ascending) with notes in
    /// canonical order. This is the shape `write_midi` produces, so a
    /// canonical song survives a write/parse cycle unchanged.
    pub fn canonicalize(&mut self) {
        let mut by_program: BTreeMap<u8, Vec<MidiNote>> = BTreeMap::new();
        for note in self.tracks.drain(..).flatten() {
            by_program.entry(note.program).or_default().push(note);
        }
        self.tracks = by_program
            .into_values()
            .map(|mut notes| {
                notes.sort_by_key(MidiNote::canonical_key);
                notes
            })
            .collect();
    }

    pub fn canonical(&self) -> MidiSong {
        let mut song = self.clone();
        song.canonicalize();
        song
    }
}

/// Counters for recoverable problems encountered while parsing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub format: u16,
    pub track_chunks: usize,
    /// Note-ons never closed before the end of their track.
    pub unclosed_notes: usize,
    /// Notes whose off event landed on the same tick as their on event.
    pub zero_length_notes: usize,
}

pub fn parse_midi(bytes: &[u8]) -> Result<MidiSong> {
    parse_midi_with_report(bytes).map(|(song, _)| song)
}

pub fn parse_midi_with_report(bytes: &[u8]) -> Result<(MidiSong, ParseReport)> {
    let mut reader = ByteReader::new(bytes);
    if reader.take(4)? != b"MThd" {
        return Err(malformed("missing MThd header"));
    }
    let header_len = reader.u32()? as usize;
    if header_len < 6 {
        return Err(malformed("header chunk shorter than 6 bytes"));
    }
    let header = reader.take(header_len)?;
    let format = u16::from_be_bytes([header[0], header[1]]);
    let declared_tracks = u16::from_be_bytes([header[2], header[3]]);
    let division = u16::from_be_bytes([header[4], header[5]]);
    if format > 1 {
        return Err(malformed(&format!("unsupported SMF format {format}")));
    }
    if division & 0x8000 != 0 {
        return Err(malformed("SMPTE time division is not supported"));
    }
    if division == 0 {
        return Err(malformed("ticks per quarter note is zero"));
    }

    let mut report = ParseReport {
        format,
        ..ParseReport::default()
    };
    let mut tempo_events = Vec::new();
    let mut time_signatures = Vec::new();
    let mut tracks = Vec::new();

    while !reader.is_empty() {
        if reader.remaining() < 8 {
            // Trailing padding after the last chunk shows up in the wild.
            break;
        }
        let id = reader.take(4)?;
        let len = reader.u32()? as usize;
        let body = reader.take(len)?;
        if id != b"MTrk" {
            continue;
        }
        report.track_chunks += 1;
        let parsed = parse_track(body, &mut report)?;
        tempo_events.extend(parsed.tempo_events);
        time_signatures.extend(parsed.time_signatures);
        if !parsed.notes.is_empty() {
            tracks.push(parsed.notes);
        }
    }
    if report.track_chunks == 0 && declared_tracks > 0 {
        return Err(malformed("no MTrk chunks found"));
    }

    tempo_events.sort_by_key(|e: &TempoEvent| e.tick);
    time_signatures.sort_by_key(|e: &TimeSignature| e.tick);
    if tempo_events.first().is_none_or(|e| e.tick > 0) {
        tempo_events.insert(
            0,
            TempoEvent {
                tick: 0,
                micros_per_quarter: DEFAULT_MICROS_PER_QUARTER,
            },
        );
    }
    if time_signatures.first().is_none_or(|e| e.tick > 0) {
        time_signatures.insert(
            0,
            TimeSignature {
                tick: 0,
                numerator: 4,
                denominator: 4,
            },
        );
    }
    if report.unclosed_notes > 0 {
        log::warn!("dropped {} unclosed note(s)", report.unclosed_notes);
    }

    Ok((
        MidiSong {
            ticks_per_quarter: division,
            tempo_events,
            time_signatures,
            tracks,
        },
        report,
    ))
}

struct ParsedTrack {
    notes: Vec<MidiNote>,
    tempo_events: Vec<TempoEvent>,
    time_signatures: Vec<TimeSignature>,
}

fn parse_track(body: &[u8], report: &mut ParseReport) -> Result<ParsedTrack> {
    let mut reader = ByteReader::new(body);
    let mut tick: u32 = 0;
    let mut running_status: Option<u8> = None;
    let mut programs = [0u8; 16];
    // (channel, pitch) -> FIFO of open notes (onset, velocity, program).
    let mut open: HashMap<(u8, u8), VecDeque<(u32, u8, u8)>> = HashMap::new();
    let mut out = ParsedTrack {
        notes: Vec::new(),
        tempo_events: Vec::new(),
        time_signatures: Vec::new(),
    };

    while !reader.is_empty() {
        let delta = reader.vlq()?;
        tick = tick.saturating_add(delta);
        let status = match reader.peek()? {
            b if b & 0x80 != 0 => {
                reader.pos += 1;
                b
            }
            _ => running_status.ok_or_else(|| malformed("data byte without running status"))?,
        };

        match status {
            0xFF => {
                running_status = None;
                let kind = reader.u8()?;
                let len = reader.vlq()? as usize;
                let data = reader.take(len)?;
                match kind {
                    0x2F => break,
                    0x51 if data.len() >= 3 => out.tempo_events.push(TempoEvent {
                        tick,
                        micros_per_quarter: u32::from_be_bytes([0, data[0], data[1], data[2]])
                            .max(1),
                    }),
                    0x58 if data.len() >= 2 => out.time_signatures.push(TimeSignature {
                        tick,
                        numerator: data[0].max(1),
                        denominator: 1u8.checked_shl(data[1] as u32).unwrap_or(4),
                    }),
                    _ => {}
                }
            }
            0xF0 | 0xF7 => {
                running_status = None;
                let len = reader.vlq()? as usize;
                reader.take(len)?;
            }
            0x80..=0xEF => {
                running_status = Some(status);
                let channel = status & 0x0F;
                match status & 0xF0 {
                    0x80 | 0x90 => {
                        let pitch = reader.u8()? & 0x7F;
                        let velocity = reader.u8()? & 0x7F;
                        let queue = open.entry((channel, pitch)).or_default();
                        if status & 0xF0 == 0x90 && velocity > 0 {
                            queue.push_back((tick, velocity, programs[channel as usize]));
                        } else if let Some((onset, velocity, program)) = queue.pop_front() {
                            if tick > onset {
                                out.notes.push(MidiNote {
                                    program,
                                    channel,
                                    pitch,
                                    onset_ticks: onset,
                                    duration_ticks: tick - onset,
                                    velocity,
                                });
                            } else {
                                report.zero_length_notes += 1;
                            }
                        }
                    }
                    0xC0 => programs[channel as usize] = reader.u8()? & 0x7F,
                    0xD0 => {
                        reader.u8()?;
                    }
                    _ => {
                        reader.take(2)?;
                    }
                }
            }
            other => return Err(malformed(&format!("unexpected status byte {other:#04x}"))),
        }
    }

    report.unclosed_notes += open.values().map(VecDeque::len).sum::<usize>();
    out.notes.sort_by_key(MidiNote::canonical_key);
    Ok(out)
}

/// Serializes `song` as an SMF format-1 file: a conductor track with tempo and
/// time-signature events followed by one track per distinct program.
pub fn write_midi(song: &MidiSong) -> Vec<u8> {
    let canonical = song.canonical();
    let mut chunks = vec![conductor_track(song)];
    for notes in &canonical.tracks {
        chunks.push(note_track(notes));
    }

    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(chunks.len() as u16).to_be_bytes());
    out.extend_from_slice(&song.ticks_per_quarter.to_be_bytes());
    for chunk in chunks {
        out.extend_from_slice(b"MTrk");
        out.extend_from_slice(&(chunk.len() as u32).to_be_bytes());
        out.extend_from_slice(&chunk);
    }
    out
}

fn conductor_track(song: &MidiSong) -> Vec<u8> {
    // (tick, order within tick, bytes)
    let mut events: Vec<(u32, usize, Vec<u8>)> = Vec::new();
    for (i, ts) in song.time_signatures.iter().enumerate() {
        let exponent = ts.denominator.max(1).trailing_zeros() as u8;
        events.push((ts.tick, i, vec![0xFF, 0x58, 0x04, ts.numerator, exponent, 24, 8]));
    }
    let offset = events.len();
    for (i, tempo) in song.tempo_events.iter().enumerate() {
        let [_, a, b, c] = tempo.micros_per_quarter.to_be_bytes();
        events.push((tempo.tick, offset + i, vec![0xFF, 0x51, 0x03, a, b, c]));
    }
    events.sort_by_key(|(tick, order, _)| (*tick, *order));

    let mut track = TrackWriter::default();
    for (tick, _, bytes) in events {
        track.event(tick, &bytes);
    }
    track.finish()
}

fn note_track(notes: &[MidiNote]) -> Vec<u8> {
    let mut track = TrackWriter::default();
    let mut channels: Vec<u8> = notes.iter().map(|n| n.channel).collect();
    channels.sort_unstable();
    channels.dedup();
    if let Some(first) = notes.first() {
        for &channel in &channels {
            track.event(0, &[0xC0 | channel, first.program]);
        }
    }

    // (tick, off-before-on, channel, pitch, velocity)
    let mut events: Vec<(u32, u8, u8, u8, u8)> = Vec::with_capacity(notes.len() * 2);
    for n in notes {
        events.push((n.onset_ticks, 1, n.channel, n.pitch, n.velocity));
        events.push((n.end_ticks(), 0, n.channel, n.pitch, 0x40));
    }
    events.sort_unstable();
    for (tick, is_on, channel, pitch, velocity) in events {
        let status = if is_on == 1 { 0x90 } else { 0x80 } | channel;
        track.channel_event(tick, status, &[pitch, velocity]);
    }
    track.finish()
}

#[derive(Default)]
struct TrackWriter {
    bytes: Vec<u8>,
    tick: u32,
    running_status: Option<u8>,
}

impl TrackWriter {
    fn delta(&mut self, tick: u32) {
        write_vlq(&mut self.bytes, tick - self.tick);
        self.tick = tick;
    }

    fn event(&mut self, tick: u32, bytes: &[u8]) {
        self.delta(tick);
        self.bytes.extend_from_slice(bytes);
        self.running_status = match bytes[0] {
            s @ 0x80..=0xEF => Some(s),
            _ => None,
        };
    }

    fn channel_event(&mut self, tick: u32, status: u8, data: &[u8]) {
        self.delta(tick);
        if self.running_status != Some(status) {
            self.bytes.push(status);
            self.running_status = Some(status);
        }
        self.bytes.extend_from_slice(data);
    }

    fn finish(mut self) -> Vec<u8> {
        let tick = self.tick;
        self.event(tick, &[0xFF, 0x2F, 0x00]);
        self.bytes
    }
}

/// Appends `value` as a MIDI variable-length quantity (at most 28 bits).
pub fn write_vlq(out: &mut Vec<u8>, value: u32) {
    debug_assert!(value <= 0x0FFF_FFFF, "VLQ overflow");
    let mut groups = [0u8; 4];
    let mut n = 0;
    let mut v = value;
    loop {
        groups[n] = (v & 0x7F) as u8;
        n += 1;
        v >>= 7;
        if v == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        let continuation = if i > 0 { 0x80 } else { 0 };
        out.push(groups[i] | continuation);
    }
}

/// Removes every note on the percussion channel. Tracks left without notes
/// are dropped.
pub fn strip_drums(song: &MidiSong) -> MidiSong {
    let tracks = song
        .tracks
        .iter()
        .map(|t| {
            t.iter()
                .filter(|n| n.channel != DRUM_CHANNEL)
                .copied()
                .collect::<Vec<_>>()
        })
        .filter(|t| !t.is_empty())
        .collect();
    MidiSong {
        tracks,
        ..song.clone()
    }
}

fn malformed(reason: &str) -> Error {
    Error::MalformedFile(reason.to_string())
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    fn is_empty(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn remaining(&self) -> usize {
        self.bytes.len().saturating_sub(self.pos)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(malformed("truncated chunk"));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn peek(&self) -> Result<u8> {
        self.bytes
            .get(self.pos)
            .copied()
            .ok_or_else(|| malformed("truncated event"))
    }

    fn u8(&mut self) -> Result<u8> {
        let b = self.peek()?;
        self.pos += 1;
        Ok(b)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn vlq(&mut self) -> Result<u32> {
        let mut value = 0u32;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | (b & 0x7F) as u32;
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(malformed("variable-length quantity longer than 4 bytes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(format: u16, tracks: u16, tpq: u16) -> Vec<u8> {
        let mut out = b"MThd".to_vec();
        out.extend_from_slice(&6u32.to_be_bytes());
        out.extend_from_slice(&format.to_be_bytes());
        out.extend_from_slice(&tracks.to_be_bytes());
        out.extend_from_slice(&tpq.to_be_bytes());
        out
    }

    fn track(body: &[u8]) -> Vec<u8> {
        let mut out = b"MTrk".to_vec();
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(body);
        out
    }

    fn note(program: u8, channel: u8, pitch: u8, onset: u32, dur: u32) -> MidiNote {
        MidiNote {
            program,
            channel,
            pitch,
            onset_ticks: onset,
            duration_ticks: dur,
            velocity: 90,
        }
    }

    #[test]
    fn vlq_encoding_matches_standard_table() {
        let cases: [(u32, &[u8]); 6] = [
            (0, &[0x00]),
            (0x7F, &[0x7F]),
            (0x80, &[0x81, 0x00]),
            (0x2000, &[0xC0, 0x00]),
            (0x3FFF, &[0xFF, 0x7F]),
            (0x0FFF_FFFF, &[0xFF, 0xFF, 0xFF, 0x7F]),
        ];
        for (value, bytes) in cases {
            let mut out = Vec::new();
            write_vlq(&mut out, value);
            assert_eq!(out, bytes, "{value:#x}");
            assert_eq!(ByteReader::new(bytes).vlq().unwrap(), value);
        }
    }

    #[test]
    fn minimal_format0_single_note() {
        // delta 0 note-on C4, delta 480 (0x83 0x60) note-off, end of track
        let mut file = header(0, 1, 480);
        file.extend(track(&[
            0x00, 0x90, 60, 100, 0x83, 0x60, 0x80, 60, 0, 0x00, 0xFF, 0x2F, 0x00,
        ]));
        let song = parse_midi(&file).unwrap();
        assert_eq!(song.ticks_per_quarter, 480);
        assert_eq!(song.note_count(), 1);
        let n = song.tracks[0][0];
        assert_eq!((n.pitch, n.onset_ticks, n.duration_ticks), (60, 0, 480));
        assert_eq!(n.velocity, 100);
        // defaults synthesized
        assert_eq!(song.tempo_events[0].micros_per_quarter, 500_000);
        assert_eq!(
            (song.time_signatures[0].numerator, song.time_signatures[0].denominator),
            (4, 4)
        );
    }

    #[test]
    fn velocity_zero_note_on_closes_note_with_running_status() {
        let mut file = header(0, 1, 480);
        // note-on, then running-status note-on velocity 0
        file.extend(track(&[
            0x00, 0x90, 64, 80, 0x83, 0x60, 64, 0, 0x00, 0xFF, 0x2F, 0x00,
        ]));
        let song = parse_midi(&file).unwrap();
        assert_eq!(song.tracks[0][0].duration_ticks, 480);
    }

    #[test]
    fn overlapping_same_pitch_pairs_first_in_first_out() {
        let mut file = header(0, 1, 96);
        file.extend(track(&[
            0x00, 0x90, 60, 100, // on @0
            0x0A, 0x90, 60, 90, // on @10
            0x0A, 0x80, 60, 0, // off @20 closes the @0 note
            0x0A, 0x80, 60, 0, // off @30 closes the @10 note
            0x00, 0xFF, 0x2F, 0x00,
        ]));
        let song = parse_midi(&file).unwrap();
        let notes = &song.tracks[0];
        assert_eq!((notes[0].onset_ticks, notes[0].duration_ticks), (0, 20));
        assert_eq!((notes[1].onset_ticks, notes[1].duration_ticks), (10, 20));
    }

    #[test]
    fn unclosed_notes_are_dropped_and_counted() {
        let mut file = header(0, 1, 96);
        file.extend(track(&[0x00, 0x90, 60, 100, 0x00, 0x90, 62, 100, 0x10, 0x80, 62, 0]));
        let (song, report) = parse_midi_with_report(&file).unwrap();
        assert_eq!(song.note_count(), 1);
        assert_eq!(report.unclosed_notes, 1);
    }

    #[test]
    fn program_change_and_meta_events_are_read() {
        let mut file = header(0, 1, 480);
        file.extend(track(&[
            0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20, // 120 BPM
            0x00, 0xFF, 0x58, 0x04, 0x03, 0x02, 24, 8, // 3/4
            0x00, 0xC1, 33, // channel 1 -> program 33
            0x00, 0xB1, 7, 100, // controller, skipped
            0x00, 0x91, 40, 70, 0x10, 0x81, 40, 0, 0x00, 0xFF, 0x2F, 0x00,
        ]));
        let song = parse_midi(&file).unwrap();
        assert_eq!(song.tempo_events.len(), 1);
        assert!((song.initial_bpm() - 120.0).abs() < 1e-9);
        assert_eq!(song.time_signatures[0].numerator, 3);
        assert_eq!(song.time_signatures[0].denominator, 4);
        assert_eq!(song.tracks[0][0].program, 33);
        assert_eq!(song.tracks[0][0].channel, 1);
        assert_eq!(song.bar_ticks(), 1440);
    }

    #[test]
    fn rejects_bad_magic_truncation_and_format2() {
        assert!(matches!(parse_midi(b"RIFF...."), Err(Error::MalformedFile(_))));
        let mut truncated = header(0, 1, 480);
        truncated.extend_from_slice(b"MTrk\x00\x00\x00\x10\x00\x90");
        assert!(matches!(parse_midi(&truncated), Err(Error::MalformedFile(_))));
        let format2 = header(2, 1, 480);
        assert!(matches!(parse_midi(&format2), Err(Error::MalformedFile(_))));
        let mut smpte = header(0, 0, 0xE250);
        smpte.truncate(14);
        assert!(parse_midi(&smpte).is_err());
    }

    #[test]
    fn empty_song_round_trips() {
        let song = MidiSong::new(480);
        let parsed = parse_midi(&write_midi(&song)).unwrap();
        assert_eq!(parsed, song);
    }

    #[test]
    fn two_programs_yield_two_note_tracks_plus_conductor() {
        let mut song = MidiSong::new(480);
        song.tracks = vec![
            vec![note(0, 0, 60, 0, 480), note(0, 0, 64, 480, 480)],
            vec![note(33, 1, 40, 0, 960)],
        ];
        let bytes = write_midi(&song);
        let (parsed, report) = parse_midi_with_report(&bytes).unwrap();
        assert_eq!(report.format, 1);
        assert_eq!(report.track_chunks, 3);
        assert_eq!(parsed.tracks.len(), 2);
        assert_eq!(parsed, song);
    }

    #[test]
    fn writing_is_deterministic() {
        let mut song = MidiSong::new(96);
        song.tracks = vec![(0..50)
            .map(|i| note(0, 0, 40 + (i * 7 % 30) as u8, i * 13, 5 + i % 7))
            .collect()];
        assert_eq!(write_midi(&song), write_midi(&song));
    }

    #[test]
    fn strip_drums_cases() {
        let mut drums_only = MidiSong::new(480);
        drums_only.tracks = vec![vec![note(0, 9, 36, 0, 10), note(0, 9, 38, 10, 10)]];
        assert_eq!(strip_drums(&drums_only).note_count(), 0);

        let mut melodic = MidiSong::new(480);
        melodic.tracks = vec![vec![note(0, 0, 60, 0, 10)]];
        assert_eq!(strip_drums(&melodic), melodic);

        let mut mixed = MidiSong::new(480);
        mixed.tracks = vec![vec![
            note(0, 0, 60, 0, 10),
            note(0, 9, 36, 0, 10),
            note(0, 0, 62, 10, 10),
            note(0, 9, 38, 10, 10),
            note(0, 1, 64, 20, 10),
            note(0, 9, 42, 20, 10),
            note(0, 0, 65, 30, 10),
            note(0, 2, 67, 40, 10),
        ]];
        let expected: Vec<MidiNote> = mixed.tracks[0]
            .iter()
            .filter(|n| n.channel != 9)
            .copied()
            .collect();
        let stripped = strip_drums(&mixed);
        assert_eq!(stripped.tracks, vec![expected]);
        assert_eq!(strip_drums(&stripped), stripped);
    }
}
