use musattn::generator::temperature_distribution;
use musattn::masks::{full_causal_mask, MaskSpec};
use musattn::metrics::{bar_error, evaluate, key_error, note_error, token_error};
use musattn::midi::{parse_midi, strip_drums, write_midi};
use musattn::synth::{diatonic_notes, random_midi_song, random_notes};
use musattn::tokenizer::key::estimate_key;
use musattn::tokenizer::quantize::DURATION_GRID;
use musattn::tokenizer::{
    decode_tokens, encode_notes, quantize_song, MetaInfo, NoteEvent, Role, TokenSequence,
    Vocabulary,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Valid meta prefix followed by arbitrary roles (meta roles excluded).
fn random_roles(r: &mut Xoshiro256PlusPlus, len: usize) -> Vec<Role> {
    let body = [
        Role::Instr,
        Role::Pitch,
        Role::Bar,
        Role::Start,
        Role::Dur,
        Role::Vel,
        Role::Eos,
    ];
    (0..len)
        .map(|i| match Role::META.get(i) {
            Some(&m) => m,
            None if r.random_bool(0.7) => Role::NOTE[(i - 3) % 6],
            None => body[r.random_range(0..body.len())],
        })
        .collect()
}

/// A stream mixing complete notes with stray tokens of any role.
fn random_stream(r: &mut Xoshiro256PlusPlus, vocab: &Vocabulary) -> TokenSequence {
    let meta = MetaInfo {
        bar_count: r.random_range(1..20),
        key: r.random_range(0..24),
        tempo_bin: r.random_range(0..16),
    };
    let mut seq = encode_notes(&meta, &[], vocab);
    for _ in 0..r.random_range(0..30) {
        if r.random_bool(0.6) {
            let note = random_notes(r, 20, 1)[0];
            for (role, v) in Role::NOTE.iter().zip(note.values()) {
                seq.push(vocab.token(*role, v), *role);
            }
        } else {
            let role = Role::ALL[r.random_range(0..Role::ALL.len())];
            let block = vocab.block(role);
            seq.push(block.offset + r.random_range(0..block.size.min(20)), role);
        }
    }
    seq
}

/// Complete notes are the non-overlapping occurrences of the six-letter role
/// word; the word cannot overlap itself, so leftmost matching is unique.
fn oracle_notes(seq: &TokenSequence, vocab: &Vocabulary) -> (Vec<NoteEvent>, usize) {
    let letter = |r: &Role| match r {
        Role::Instr => 'i',
        Role::Pitch => 'p',
        Role::Bar => 'b',
        Role::Start => 's',
        Role::Dur => 'd',
        Role::Vel => 'v',
        _ => 'x',
    };
    let prefix = seq.meta_prefix_len();
    let word: String = seq.roles[prefix..].iter().map(letter).collect();
    let mut notes = Vec::new();
    for (at, _) in word.match_indices("ipbsdv") {
        let v = |k: usize| vocab.decode(seq.ids[prefix + at + k]).unwrap().1;
        notes.push(NoteEvent {
            instrument: v(0) as u8,
            pitch: v(1) as u8,
            bar: v(2),
            start: v(3) as u8,
            duration: v(4) as u8,
            velocity: v(5) as u8,
        });
    }
    let skipped = word.len() - 6 * notes.len();
    (notes, skipped)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn midi_write_parse_is_identity(seed in any::<u64>()) {
        let song = random_midi_song(&mut rng(seed));
        prop_assert_eq!(parse_midi(&write_midi(&song)).unwrap(), song.clone());
        prop_assert_eq!(write_midi(&song), write_midi(&parse_midi(&write_midi(&song)).unwrap()));
    }

    #[test]
    fn strip_drums_is_idempotent(seed in any::<u64>()) {
        let song = random_midi_song(&mut rng(seed));
        let once = strip_drums(&song);
        prop_assert_eq!(strip_drums(&once), once.clone());
        prop_assert!(once.notes().all(|n| n.channel != 9));
    }

    #[test]
    fn tokens_round_trip_quantized_notes(seed in any::<u64>(), count in 1usize..80) {
        let vocab = Vocabulary::default();
        let notes = random_notes(&mut rng(seed), 64, count);
        let meta = MetaInfo::new(64, 0, 120.0);
        let seq = encode_notes(&meta, &notes, &vocab);
        prop_assert_eq!(token_error(&seq, &vocab), 0);
        let song = decode_tokens(&seq, &vocab);
        let (_, back) = quantize_song(&song, &vocab, None).unwrap();
        prop_assert_eq!(back, notes);
    }

    #[test]
    fn key_estimate_follows_transposition(seed in any::<u64>(), key in 0u8..24, shift in 0u8..12) {
        let notes = diatonic_notes(&mut rng(seed), key, 4, 0);
        let base = estimate_key(&notes).unwrap();
        let moved: Vec<NoteEvent> = notes
            .iter()
            .map(|n| NoteEvent { pitch: (n.pitch + shift) % 84, ..*n })
            .collect();
        let expected = if base < 12 { (base + shift) % 12 } else { 12 + (base - 12 + shift) % 12 };
        prop_assert_eq!(estimate_key(&moved).unwrap(), expected);
    }

    #[test]
    fn mask_algebra(seed in any::<u64>(), len in 1usize..200, window in 1usize..40, stride in 1usize..12) {
        let mut r = rng(seed);
        let roles = random_roles(&mut r, len);
        let full = full_causal_mask(&roles);
        let strided = MaskSpec::strided(window, stride).build(&roles).unwrap();
        let musical = MaskSpec::musical(window).build(&roles).unwrap();
        let wider = MaskSpec::musical(window + 1).build(&roles).unwrap();
        prop_assert!(strided.is_subset_of(&full));
        prop_assert!(musical.is_subset_of(&full));
        prop_assert!(musical.is_subset_of(&wider));
        prop_assert!(MaskSpec::strided(window, stride).build(&roles).unwrap()
            .is_subset_of(&MaskSpec::strided(window + 1, stride).build(&roles).unwrap()));
        for q in 0..len {
            prop_assert!(musical.get(q, q) && strided.get(q, q));
            for k in q + 1..len {
                prop_assert!(!musical.get(q, k) && !strided.get(q, k));
            }
        }
    }

    #[test]
    fn musical_rows_reach_their_dependencies(seed in any::<u64>(), len in 4usize..200) {
        let mut r = rng(seed);
        let roles = random_roles(&mut r, len);
        let m = MaskSpec::musical(1).build(&roles).unwrap();
        for q in 3..len {
            let sees = |k: usize| m.get(q, k);
            match roles[q] {
                Role::Pitch => prop_assert!(sees(1)),
                Role::Bar => prop_assert!(sees(0)),
                Role::Start | Role::Dur => prop_assert!(sees(2)),
                Role::Vel => {
                    for k in 0..q {
                        if roles[k] == Role::Instr {
                            prop_assert!(sees(k));
                        }
                    }
                }
                _ => {}
            }
        }
    }

    #[test]
    fn metrics_match_brute_force(seed in any::<u64>()) {
        let vocab = Vocabulary::default();
        let mut r = rng(seed);
        let seq = random_stream(&mut r, &vocab);
        let (notes, skipped) = oracle_notes(&seq, &vocab);
        prop_assert_eq!(token_error(&seq, &vocab), skipped);

        let mut faults = 0;
        for w in notes.windows(2) {
            let (a, b) = (w[0], w[1]);
            if (a.instrument, a.pitch, a.bar, a.start) == (b.instrument, b.pitch, b.bar, b.start) {
                faults += 1;
            } else if a.bar > b.bar {
                faults += 1;
            } else if a.bar == b.bar && a.start > b.start {
                faults += 1;
            }
        }
        prop_assert_eq!(note_error(&notes), faults);

        let requested = r.random_range(1..20u32);
        let expected_bar = match notes.last() {
            None => requested as f64,
            Some(n) => {
                let end = 48 * n.bar as i64 + n.start as i64 + DURATION_GRID[n.duration as usize] as i64;
                (end - 48 * requested as i64).abs() as f64 / 48.0
            }
        };
        prop_assert_eq!(bar_error(&seq, &vocab, requested), expected_bar);

        let key = r.random_range(0..24u8);
        let tonic = if key < 12 { key } else { (key - 12 + 9) % 12 };
        let major_tonic = if key < 12 { tonic } else { (tonic + 3) % 12 };
        let scale: Vec<u8> = [0, 2, 4, 5, 7, 9, 11].iter().map(|s| (major_tonic + s) % 12).collect();
        let outside = notes.iter().filter(|n| !scale.contains(&(n.pitch % 12))).count();
        let expected_key = if notes.is_empty() { 0.0 } else { 100.0 * outside as f64 / notes.len() as f64 };
        prop_assert!((key_error(&notes, key) - expected_key).abs() < 1e-12);

        let report = evaluate(&seq, &vocab, requested, key);
        prop_assert_eq!(report.note_count, notes.len());
        prop_assert!(report.key_error <= 100.0 && report.bar_error >= 0.0);
    }

    #[test]
    fn key_error_ignores_octaves(seed in any::<u64>(), key in 0u8..24) {
        let mut r = rng(seed);
        let notes = random_notes(&mut r, 8, 30);
        let shifted: Vec<NoteEvent> = notes
            .iter()
            .map(|n| NoteEvent { pitch: n.pitch % 12 + 12 * r.random_range(0..7u8), ..*n })
            .collect();
        prop_assert_eq!(key_error(&notes, key), key_error(&shifted, key));
    }

    #[test]
    fn temperature_is_permutation_equivariant(
        logits in prop::collection::vec(-20.0f64..20.0, 1..40),
        t in 0.05f64..5.0,
        seed in any::<u64>(),
    ) {
        let probs = temperature_distribution(&logits, t).unwrap();
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let mut order: Vec<usize> = (0..logits.len()).collect();
        let mut r = rng(seed);
        for i in (1..order.len()).rev() {
            order.swap(i, r.random_range(0..=i));
        }
        let permuted: Vec<f64> = order.iter().map(|&i| logits[i]).collect();
        let p2 = temperature_distribution(&permuted, t).unwrap();
        for (j, &i) in order.iter().enumerate() {
            prop_assert!((p2[j] - probs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn low_temperature_concentrates(logits in prop::collection::vec(-5.0f64..5.0, 2..30)) {
        let mut logits = logits;
        let best = logits.iter().cloned().fold(f64::MIN, f64::max);
        let top = logits.iter().position(|&x| x == best).unwrap();
        for (i, x) in logits.iter_mut().enumerate() {
            if i != top && *x > best - 1.0 {
                *x = best - 1.0;
            }
        }
        let p = temperature_distribution(&logits, 0.01).unwrap();
        prop_assert!(p[top] >= 0.999);
    }
}

#[test]
fn unit_temperature_is_plain_softmax() {
    let logits = [0.3, -1.2, 2.5, 0.0, 4.1];
    let z: f64 = logits.iter().map(|x: &f64| x.exp()).sum();
    let p = temperature_distribution(&logits, 1.0).unwrap();
    for (a, x) in p.iter().zip(logits) {
        assert!((a - x.exp() / z).abs() <= 1e-12);
    }
}
