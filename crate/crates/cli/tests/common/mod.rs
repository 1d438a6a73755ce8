#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use musattn::midi::write_midi;
use musattn::synth::diatonic_song;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Writes `count` diatonic piano pieces in random major keys.
pub fn write_corpus(dir: &Path, count: usize, bars: u32, seed: u64) -> Vec<PathBuf> {
    std::fs::create_dir_all(dir).unwrap();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let key = rng.random_range(0..12u8);
            let song = diatonic_song(&mut rng, key, bars, 100.0, 0);
            let path = dir.join(format!("song-{i:03}.mid"));
            std::fs::write(&path, write_midi(&song)).unwrap();
            path
        })
        .collect()
}

pub fn musattn(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_musattn"))
        .args(args)
        .output()
        .expect("binary runs");
    if !out.status.success() {
        panic!(
            "musattn {} failed:\n{}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        );
    }
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Flags for a model small enough to train in seconds.
pub const SMALL_MODEL: &[&str] = &[
    "--layers", "1", "--d-model", "16", "--heads", "2", "--ffn", "32,16", "--max-len", "128",
    "--batch-size", "2", "--lr", "0.003", "--warmup", "10",
];
