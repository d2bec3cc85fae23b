use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sslcf::kvtext::KvText;
use sslcf::synthetic::BlockGraph;

fn sslcf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sslcf")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

/// Writes a raw TSV file and a config pointing at it; returns the config path.
fn setup(root: &Path, model: &str, extra: &str) -> String {
    let mut raw = String::new();
    for (u, i) in (BlockGraph { density: 0.7, ..BlockGraph::dense(2, 15, 12) }).pairs(2) {
        raw.push_str(&format!("u{u}\ti{i}\n"));
    }
    fs::write(root.join("raw.tsv"), raw).unwrap();
    let config = format!(
        "seed: 4\ndata:\n  path: {}\n  kcore: 3\nmodel:\n  name: {model}\n  dim: 8\n  layers: 2\ntrain:\n  lr: 0.03\n  batch: 64\n  max_epochs: 6\n  eval_interval: 2\neval:\n  cutoffs: [5, 10]\n  objective: recall@5\n{extra}",
        s(&root.join("raw.tsv"))
    );
    let path = root.join("c.yaml");
    fs::write(&path, config).unwrap();
    s(&path)
}

#[test]
fn preprocess_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = setup(root, "simgcl", "");
    let data = s(&root.join("data"));
    let out = sslcf(&["--quiet", "preprocess", "--config", &cfg, "--out", &data]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["meta", "train.tsv", "val.tsv", "test.tsv", "users.tsv", "items.tsv"] {
        assert!(root.join("data").join(f).exists(), "{f}");
    }

    let run = s(&root.join("run"));
    let out = sslcf(&["--quiet", "train", "--config", &cfg, "--data", &data, "--out", &run]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = KvText::read(&root.join("run/report")).unwrap();
    assert_eq!(report.get("model"), Some("simgcl"));
    assert_eq!(report.get("split"), Some("test"));
    assert!(report.get("data_ratios").is_some());

    let out = sslcf(&["eval", "--config", &cfg, "--checkpoint", &s(&root.join("run/best"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let evaluated = KvText::parse_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    for key in ["epoch", "n_users", "recall@5", "recall@10", "ndcg@5", "ndcg@10"] {
        assert_eq!(evaluated.get(key), report.get(key), "{key}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = setup(root, "lightgcn", "");
    let data = s(&root.join("data"));
    assert!(sslcf(&["--quiet", "preprocess", "--config", &cfg, "--out", &data]).status.success());
    for (run, seed) in [("a", "4"), ("b", "5")] {
        let out = sslcf(&["--quiet", "--seed", seed, "train", "--config", &cfg, "--data", &data, "--out", &s(&root.join(run))]);
        assert!(out.status.success());
    }
    let a = fs::read(root.join("a/best/e0.bin")).unwrap();
    let b = fs::read(root.join("b/best/e0.bin")).unwrap();
    assert_ne!(a, b);
    let snap = fs::read_to_string(root.join("b/config.snapshot")).unwrap();
    assert!(snap.starts_with("seed: 5\n"), "{snap}");
}

#[test]
fn tune_writes_trials_and_trial_runs() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = setup(root, "sgl", "tune:\n  layers: [1, 2]\n  dropout: [0.1, 0.2]\n");
    let data = s(&root.join("data"));
    assert!(sslcf(&["--quiet", "preprocess", "--config", &cfg, "--out", &data]).status.success());
    let out = sslcf(&["--quiet", "tune", "--config", &cfg, "--data", &data, "--out", &s(&root.join("tune"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let tsv = fs::read_to_string(root.join("tune/trials.tsv")).unwrap();
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines[0], "trial\tseed\tlayers\tdropout\trecall@5\tstatus");
    assert_eq!(lines.len(), 5);
    for (k, (l, d)) in [("1", "0.1"), ("1", "0.2"), ("2", "0.1"), ("2", "0.2")].iter().enumerate() {
        let cols: Vec<&str> = lines[k + 1].split('\t').collect();
        assert_eq!((cols[0], cols[2], cols[3], cols[5]), (k.to_string().as_str(), *l, *d, "ok"));
        assert!(root.join(format!("tune/trial_{k:03}/report")).exists());
    }
    assert!(root.join("tune/best.snapshot").exists());
}

#[test]
fn exit_codes() {
    assert_eq!(sslcf(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(sslcf(&[]).status.code(), Some(2));
    assert_eq!(sslcf(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fs::write(root.join("bad.yaml"), "data:\n  path: x.tsv\nmodel:\n  name: lightgcn\n  layers: -1\n").unwrap();
    let out = sslcf(&["preprocess", "--config", &s(&root.join("bad.yaml")), "--out", &s(&root.join("d"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("model.layers") && err.contains("line 5"), "{err}");

    // A well-formed config whose data file is missing is a runtime failure.
    fs::write(root.join("ok.yaml"), "data:\n  path: /nonexistent/raw.tsv\nmodel:\n  name: lightgcn\n").unwrap();
    let out = sslcf(&["preprocess", "--config", &s(&root.join("ok.yaml")), "--out", &s(&root.join("d"))]);
    assert_eq!(out.status.code(), Some(1));

    let out = sslcf(&["tune", "--config", &s(&root.join("ok.yaml")), "--data", "x", "--out", "y"]);
    assert_eq!(out.status.code(), Some(2), "tune without a tune section");
}
