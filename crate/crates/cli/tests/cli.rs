mod common;

use std::path::Path;

use common::{musattn, s, write_corpus, SMALL_MODEL};
use musattn::tokenizer::{Role, TokenSequence};
use musattn_cli::commands::preprocess::{self, load_dataset, PreprocessConfig};
use musattn_cli::commands::train::read_log;
use serde_json::Value;

fn preprocess_small(root: &Path) -> std::path::PathBuf {
    let midi = root.join("midi");
    write_corpus(&midi, 3, 4, 7);
    let data = root.join("data");
    musattn(&["preprocess", "--input", s(&midi), "--out", s(&data), "--max-len", "128"]);
    data
}

fn train(data: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec!["train", "--data", s(data), "--out", s(out)];
    args.extend_from_slice(SMALL_MODEL);
    args.extend_from_slice(extra);
    musattn(&args);
}

#[test]
fn preprocess_counts_and_skips_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let midi = dir.path().join("midi");
    write_corpus(&midi.join("nested"), 3, 4, 1);
    std::fs::write(midi.join("broken.mid"), b"MThd\x00\x00").unwrap();
    std::fs::write(midi.join("notes.txt"), b"not midi").unwrap();
    let cfg = PreprocessConfig {
        input: midi,
        out: dir.path().join("data"),
        max_len: 64,
        ..PreprocessConfig::default()
    };
    let stats = preprocess::run(&cfg).unwrap();
    assert_eq!(stats.files_found, 4);
    assert_eq!(stats.files_used, 3);
    assert_eq!(stats.files_malformed, 1);
    assert_eq!(stats.skipped[0].path, "broken.mid");

    let (vocab, records) = load_dataset(&cfg.out).unwrap();
    assert_eq!(records.len(), stats.records);
    assert!(records.len() > 3, "pieces longer than 64 tokens are segmented");
    let mut eos = 0;
    for r in &records {
        assert!(r.len() <= 64);
        let seq = TokenSequence::from_ids(r.clone(), &vocab).unwrap();
        assert_eq!(&seq.roles[..3], &Role::META);
        eos += (seq.roles.last() == Some(&Role::Eos)) as usize;
    }
    assert_eq!(eos, 3);
}

#[test]
fn preprocess_rejects_corpus_without_valid_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("midi")).unwrap();
    std::fs::write(dir.path().join("midi/x.mid"), b"garbage").unwrap();
    let cfg = PreprocessConfig {
        input: dir.path().join("midi"),
        out: dir.path().join("data"),
        ..PreprocessConfig::default()
    };
    let err = preprocess::run(&cfg).unwrap_err();
    assert!(err.to_string().contains("no valid MIDI"));
}

#[test]
fn train_log_and_resume_match() {
    let dir = tempfile::tempdir().unwrap();
    let data = preprocess_small(dir.path());
    let a = dir.path().join("a");
    train(&data, &a, &["--steps", "50", "--checkpoint-every", "25", "--seed", "3"]);
    let rows = read_log(&a.join("train_log.csv")).unwrap();
    assert_eq!(rows.len(), 50);
    assert_eq!(rows.iter().map(|r| r.step).collect::<Vec<_>>(), (1..=50).collect::<Vec<_>>());
    assert!(a.join("step-25.ckpt").exists() && a.join("step-50.ckpt").exists());
    assert!(a.join("final.ckpt").exists());

    let b = dir.path().join("b");
    let ckpt = a.join("step-25.ckpt");
    musattn(&["train", "--data", s(&data), "--out", s(&b), "--steps", "50", "--resume", s(&ckpt)]);
    let resumed = read_log(&b.join("train_log.csv")).unwrap();
    assert_eq!(resumed.len(), 25);
    for (x, y) in rows[25..].iter().zip(&resumed) {
        assert_eq!((x.step, x.loss, x.accuracy), (y.step, y.loss, y.accuracy));
    }

    // resuming in place drops log rows past the checkpoint
    musattn(&["train", "--data", s(&data), "--out", s(&a), "--steps", "30", "--resume", s(&ckpt)]);
    let again = read_log(&a.join("train_log.csv")).unwrap();
    assert_eq!(again.len(), 30);
    assert_eq!(again[29].loss, rows[29].loss);
}

#[test]
fn mask_choice_is_the_only_config_difference() {
    let dir = tempfile::tempdir().unwrap();
    let data = preprocess_small(dir.path());
    let mut configs = Vec::new();
    for mask in ["full", "musical"] {
        let out = dir.path().join(mask);
        train(&data, &out, &["--steps", "1", "--mask", mask]);
        let text = std::fs::read_to_string(out.join("config.json")).unwrap();
        let mut v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["train"]["mask"]["kind"], mask);
        v["train"]["mask"]["kind"] = Value::Null;
        v["out"] = Value::Null;
        configs.push(v);
    }
    assert_eq!(configs[0], configs[1]);
}

#[test]
fn generate_evaluate_render() {
    let dir = tempfile::tempdir().unwrap();
    let data = preprocess_small(dir.path());
    let run = dir.path().join("run");
    train(&data, &run, &["--steps", "5"]);
    let samples = dir.path().join("samples");
    musattn(&[
        "generate", "--checkpoint", s(&run.join("final.ckpt")), "--out-dir", s(&samples),
        "--count", "3", "--bars", "4", "--max-tokens", "100", "--dump-heatmaps", "--seed", "9",
    ]);
    let manifest = samples.join("manifest.jsonl");
    let lines: Vec<Value> = std::fs::read_to_string(&manifest)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[2]["seed"], 11);
    assert_eq!(lines[0]["key"], "Cmaj");
    for l in &lines {
        assert!(samples.join(l["path"].as_str().unwrap()).exists());
    }

    let eval = dir.path().join("eval");
    musattn(&["evaluate", "--manifest", s(&manifest), "--out-dir", s(&eval)]);
    let reports = std::fs::read_to_string(eval.join("reports.jsonl")).unwrap();
    assert_eq!(reports.lines().count(), 3);
    let csv = std::fs::read_to_string(eval.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
    assert!(eval.join("summary.txt").exists());

    let render = dir.path().join("render");
    musattn(&["render", "--manifest", s(&manifest), "--out-dir", s(&render)]);
    let svgs: Vec<String> = std::fs::read_dir(&render)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("piece-000") && n.ends_with(".svg"))
        .collect();
    assert_eq!(svgs.len(), 7, "{svgs:?}");
    assert!(svgs.contains(&"piece-000.pianoroll.svg".to_string()));
    let pitch = std::fs::read_to_string(render.join("piece-000.heatmap-pitch.csv")).unwrap();
    assert_eq!(pitch.lines().count(), 84);
}

#[test]
fn evaluate_falls_back_to_midi() {
    let dir = tempfile::tempdir().unwrap();
    let data = preprocess_small(dir.path());
    let run = dir.path().join("run");
    train(&data, &run, &["--steps", "2"]);
    let samples = dir.path().join("samples");
    musattn(&[
        "generate", "--checkpoint", s(&run.join("final.ckpt")), "--out-dir", s(&samples),
        "--count", "2", "--max-tokens", "60", "--role-constrained",
    ]);
    for i in 0..2 {
        std::fs::remove_file(samples.join(format!("piece-00{i}.tokens.json"))).unwrap();
    }
    let eval = dir.path().join("eval");
    musattn(&["evaluate", "--manifest", s(&samples.join("manifest.jsonl")), "--out-dir", s(&eval)]);
    for line in std::fs::read_to_string(eval.join("reports.jsonl")).unwrap().lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["token_error"], 0);
    }
}

#[test]
fn inspect_full_mask_is_lower_triangular() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("masks");
    musattn(&["inspect-mask", "--mask", "full", "--len", "8", "--out-dir", s(&out)]);
    let pgm = std::fs::read(out.join("mask-full-8.pgm")).unwrap();
    let header = b"P5\n8 8\n255\n";
    assert_eq!(&pgm[..header.len()], header);
    let body = &pgm[header.len()..];
    assert_eq!(body.len(), 64);
    for q in 0..8 {
        for k in 0..8 {
            assert_eq!(body[q * 8 + k], if k <= q { 255 } else { 0 });
        }
    }
    let csv = std::fs::read_to_string(out.join("mask-full-8.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("1,0,0,0,0,0,0,0"));
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mask.json");
    std::fs::write(&cfg, r#"{"mask": {"kind": "strided", "window": 2, "stride": 3}, "len": 12}"#).unwrap();
    let out = dir.path().join("m");
    musattn(&["--config", s(&cfg), "inspect-mask", "--len", "10", "--out-dir", s(&out)]);
    let echoed: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed["len"], 10);
    assert_eq!(echoed["mask"]["kind"], "strided");
    assert!(out.join("mask-strided-10.pgm").exists());
}
