//! Scalar quantizers from MIDI quantities to token values and back.

/// Durations representable by a duration token, in 48th-note units.
pub const DURATION_GRID: [u32; 12] = [1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 40, 48];

const VELOCITY_LOW: u32 = 40;
const VELOCITY_HIGH: u32 = 115;
const TEMPO_LOW: f64 = 50.0;
const TEMPO_HIGH: f64 = 200.0;

/// MIDI note number of C0 (so C4 = 60).
pub const LOWEST_PITCH: u8 = 12;
/// MIDI note number of B6.
pub const HIGHEST_PITCH: u8 = 95;

pub fn quantize_velocity(velocity: u8) -> u8 {
    let v = (velocity as u32).clamp(VELOCITY_LOW, VELOCITY_HIGH);
    ((v - VELOCITY_LOW) * 16 / (VELOCITY_HIGH - VELOCITY_LOW + 1)).min(15) as u8
}

/// Representative MIDI velocity for a velocity bin (bin midpoint).
pub fn velocity_from_bin(bin: u8) -> u8 {
    let width = (VELOCITY_HIGH - VELOCITY_LOW + 1) as f64 / 16.0;
    (VELOCITY_LOW as f64 + (bin as f64 + 0.5) * width).round() as u8
}

pub fn quantize_tempo(bpm: f64) -> u8 {
    debug_assert!(bpm > 0.0);
    let b = bpm.clamp(TEMPO_LOW, TEMPO_HIGH);
    (((b - TEMPO_LOW) * 16.0 / (TEMPO_HIGH - TEMPO_LOW)).floor() as u8).min(15)
}

pub fn tempo_from_bin(bin: u8) -> f64 {
    TEMPO_LOW + (bin as f64 + 0.5) * (TEMPO_HIGH - TEMPO_LOW) / 16.0
}

/// Length in 48th-note units, rounded and clamped to [1, 48].
pub fn duration_units(ticks: u32, ticks_per_quarter: u16) -> u32 {
    let tpq = ticks_per_quarter.max(1) as u64;
    let units = (ticks as u64 * 24 + tpq) / (2 * tpq);
    units.clamp(1, 48) as u32
}

/// Index of the nearest duration-grid entry; ties go to the shorter one.
pub fn quantize_duration(ticks: u32, ticks_per_quarter: u16) -> u8 {
    let units = duration_units(ticks, ticks_per_quarter);
    let mut best = 0;
    for (i, &g) in DURATION_GRID.iter().enumerate() {
        if units.abs_diff(g) < units.abs_diff(DURATION_GRID[best]) {
            best = i;
        }
    }
    best as u8
}

/// General MIDI program to one of ten instrument classes.
pub fn map_program_to_class(program: u8) -> u8 {
    match program {
        0..=7 => 0,   // piano
        8..=15 => 1,  // chromatic percussion
        16..=23 => 2, // organ
        24..=31 => 3, // guitar
        32..=39 => 4, // bass
        40..=47 => 5, // strings
        48..=55 => 6, // ensemble
        56..=63 => 7, // brass
        64..=79 => 8, // reed and pipe
        _ => 9,       // synth and everything else
    }
}

/// A program that maps back onto `class`.
pub fn class_to_program(class: u8) -> u8 {
    [0, 8, 16, 24, 32, 40, 48, 56, 64, 80][class.min(9) as usize]
}

/// Folds a MIDI pitch by octaves into C0..=B6 and returns its index there.
pub fn fold_pitch(pitch: u8) -> u8 {
    let mut p = pitch;
    while p < LOWEST_PITCH {
        p += 12;
    }
    while p > HIGHEST_PITCH {
        p -= 12;
    }
    p - LOWEST_PITCH
}

/// Start position of `offset_ticks` on a 48-step bar grid.
pub fn quantize_start(offset_ticks: u32, bar_ticks: u32) -> u8 {
    let bar = bar_ticks.max(1) as u64;
    let pos = (offset_ticks as u64 * 96 + bar) / (2 * bar);
    pos.min(47) as u8
}
