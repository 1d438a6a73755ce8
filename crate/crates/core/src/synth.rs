//! Random test material: arbitrary MIDI songs, arbitrary quantized notes and
//! small diatonic pieces for toy corpora.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::midi::{MidiNote, MidiSong, TempoEvent, TimeSignature};
use crate::tokenizer::key::{is_major, relative_major, tonic};
use crate::tokenizer::quantize::DURATION_GRID;
use crate::tokenizer::vocab::{
    DURATION_BINS, INSTRUMENT_CLASSES, PITCH_COUNT, START_POSITIONS, VELOCITY_BINS,
};
use crate::tokenizer::{MetaInfo, NoteEvent};

const MAJOR_STEPS: [u8; 7] = [0, 2, 4, 5, 7, 9, 11];

/// A canonical song with arbitrary timing: several programs and channels,
/// tempo and time-signature changes, overlapping notes on distinct pitches.
pub fn random_midi_song<R: Rng>(rng: &mut R) -> MidiSong {
    let tpq = *[24u16, 96, 120, 384, 480, 960].choose(rng).unwrap();
    let mut song = MidiSong::new(tpq);
    let horizon = tpq as u32 * rng.random_range(4..64);

    song.tempo_events = vec![TempoEvent {
        tick: 0,
        micros_per_quarter: rng.random_range(200_000..1_500_000),
    }];
    let mut tick = 0;
    for _ in 0..rng.random_range(0..3) {
        tick += rng.random_range(1..horizon);
        song.tempo_events.push(TempoEvent {
            tick,
            micros_per_quarter: rng.random_range(200_000..1_500_000),
        });
    }
    song.time_signatures = vec![TimeSignature {
        tick: 0,
        numerator: rng.random_range(2..8),
        denominator: *[2u8, 4, 8].choose(rng).unwrap(),
    }];
    if rng.random_bool(0.3) {
        song.time_signatures.push(TimeSignature {
            tick: rng.random_range(1..horizon),
            numerator: 3,
            denominator: 4,
        });
    }

    let programs = rng.random_range(1..4);
    let mut channels: Vec<u8> = (0..16).collect();
    for _ in 0..programs {
        let program = rng.random_range(0..128);
        let channel = channels.remove(rng.random_range(0..channels.len()));
        let mut busy_until = [0u32; 128];
        for _ in 0..rng.random_range(1..40) {
            let pitch = rng.random_range(0..128u8);
            let onset = rng.random_range(0..horizon);
            if onset < busy_until[pitch as usize] {
                continue;
            }
            let duration = rng.random_range(1..tpq as u32 * 4);
            busy_until[pitch as usize] = onset + duration;
            song.tracks.push(vec![MidiNote {
                program,
                channel,
                pitch,
                onset_ticks: onset,
                duration_ticks: duration,
                velocity: rng.random_range(1..128),
            }]);
        }
    }
    // earlier draws of the same pitch may end after later onsets; drop those
    let mut notes: Vec<MidiNote> = song.tracks.drain(..).flatten().collect();
    notes.sort_by_key(|n| (n.channel, n.pitch, n.onset_ticks));
    notes.dedup_by(|b, a| a.channel == b.channel && a.pitch == b.pitch && b.onset_ticks < a.end_ticks());
    song.tracks = vec![notes];
    song.canonicalize();
    song
}

/// Arbitrary quantized notes in tokenizer order, deduplicated.
pub fn random_notes<R: Rng>(rng: &mut R, max_bars: u32, count: usize) -> Vec<NoteEvent> {
    let mut notes: Vec<NoteEvent> = (0..count)
        .map(|_| NoteEvent {
            instrument: rng.random_range(0..INSTRUMENT_CLASSES as u8),
            pitch: rng.random_range(0..PITCH_COUNT as u8),
            bar: rng.random_range(0..max_bars),
            start: rng.random_range(0..START_POSITIONS as u8),
            duration: rng.random_range(0..DURATION_BINS as u8),
            velocity: rng.random_range(0..VELOCITY_BINS as u8),
        })
        .collect();
    notes.sort_by_key(|n| (n.bar, n.start, n.instrument, n.pitch, n.duration, n.velocity));
    notes.dedup();
    notes
}

/// Pitch classes of `key`'s scale, tonic first (natural minor for minor keys).
pub fn scale_of(key: u8) -> [u8; 7] {
    let root = tonic(relative_major(key));
    let shift = if is_major(key) { 0 } else { 5 };
    let mut out = [0u8; 7];
    for (i, o) in out.iter_mut().enumerate() {
        *o = (root + MAJOR_STEPS[(i + shift) % 7]) % 12;
    }
    out
}

/// Index into `DURATION_GRID` of an exact unit count.
fn grid(units: u32) -> u8 {
    DURATION_GRID.iter().position(|&g| g == units).expect("grid length") as u8
}

/// A diatonic piano-style piece: a bass note per bar under an arpeggiated
/// triad on a random scale degree. Every pitch belongs to `key`'s scale.
pub fn diatonic_notes<R: Rng>(rng: &mut R, key: u8, bars: u32, instrument: u8) -> Vec<NoteEvent> {
    let scale = scale_of(key);
    // degrees used for chord roots: I, ii, iii, IV, V, vi
    let roots = [0usize, 1, 2, 3, 4, 5];
    let mut notes = Vec::new();
    // pitch indices start at C, so index = 12 * octave + pitch class
    let octave = |pc: u8, oct: u8| -> u8 { 12 * oct + pc };
    for bar in 0..bars {
        let degree = if bar == 0 || bar + 1 == bars {
            0
        } else {
            *roots.choose(rng).unwrap()
        };
        let triad = [scale[degree], scale[(degree + 2) % 7], scale[(degree + 4) % 7]];
        let vel = rng.random_range(7..12);
        notes.push(NoteEvent {
            instrument,
            pitch: octave(triad[0], 2),
            bar,
            start: 0,
            duration: grid(48),
            velocity: vel,
        });
        let (step, dur) = if rng.random_bool(0.5) { (6u8, 6u32) } else { (12, 12) };
        let mut start = 0u8;
        let mut i = 0usize;
        let upward = rng.random_bool(0.5);
        while (start as usize) < START_POSITIONS {
            let idx = if upward { i % 3 } else { 2 - i % 3 };
            let oct = 4 + (i / 3 % 2) as u8;
            notes.push(NoteEvent {
                instrument,
                pitch: octave(triad[idx], oct),
                bar,
                start,
                duration: grid(dur),
                velocity: vel,
            });
            start += step;
            i += 1;
        }
    }
    notes.sort_by_key(|n| (n.bar, n.start, n.instrument, n.pitch, n.duration, n.velocity));
    notes.dedup();
    notes
}

/// A diatonic piece as MIDI, 480 ticks per quarter in 4/4.
pub fn diatonic_song<R: Rng>(rng: &mut R, key: u8, bars: u32, bpm: f64, program: u8) -> MidiSong {
    let notes = diatonic_notes(rng, key, bars, 0);
    let mut song = crate::tokenizer::notes_to_song(&notes);
    for n in song.tracks.iter_mut().flatten() {
        n.program = program;
    }
    song.tempo_events[0].micros_per_quarter = (60_000_000.0 / bpm).round() as u32;
    song.canonicalize();
    song
}

/// Meta information and notes for a random diatonic piece with a random key.
pub fn random_diatonic_piece<R: Rng>(rng: &mut R, bars: u32, bpm: f64) -> (MetaInfo, Vec<NoteEvent>) {
    let key = rng.random_range(0..24u8);
    let notes = diatonic_notes(rng, key, bars, 0);
    (MetaInfo::new(bars, key, bpm), notes)
}
