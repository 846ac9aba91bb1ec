//! Exit-code and interface contracts of the `hml` binary.

use std::path::Path;
use std::process::Command;

fn hml(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hml"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawning hml")
}

fn setup_small_run(dir: &Path) {
    for args in [
        vec!["synth-data", "--n-videos", "8", "--seed", "3", "--out", "data"],
        vec!["segment", "--corpus", "data/corpus.json", "--seed", "3", "--out", "run"],
        vec!["fit-normalizer", "--manifest", "run/manifest.json", "--out", "run"],
        vec![
            "extract-features",
            "--manifest", "run/manifest.json",
            "--normalizer", "run/normalizer.json",
            "--out", "run",
        ],
        vec![
            "train",
            "--manifest", "run/manifest.json",
            "--data", "run",
            "--layers", "1",
            "--hidden", "4",
            "--epochs", "1",
            "--seed", "3",
            "--out", "run/model_det",
        ],
    ] {
        let out = hml(dir, &args);
        assert!(
            out.status.success(),
            "setup step {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn unknown_flags_exit_2_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = hml(dir.path(), &["synth-data", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr).to_lowercase();
    assert!(stderr.contains("usage"), "expected usage text, got: {stderr}");

    let out = hml(dir.path(), &["not-a-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sample_on_deterministic_checkpoint_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    setup_small_run(dir.path());
    let out = hml(dir.path(), &[
        "sample",
        "--checkpoint", "run/model_det/checkpoint.json",
        "--manifest", "run/manifest.json",
        "--data", "run",
        "--k", "10",
        "--seed", "3",
        "--out", "run/bad",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("model not stochastic"),
        "diagnostic missing: {stderr}"
    );
    // One-line diagnostic.
    assert_eq!(stderr.trim().lines().count(), 1, "stderr: {stderr}");
}

#[test]
fn predict_on_deterministic_checkpoint_succeeds_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    setup_small_run(dir.path());
    let args = [
        "predict",
        "--checkpoint", "run/model_det/checkpoint.json",
        "--manifest", "run/manifest.json",
        "--data", "run",
        "--out", "run/gen",
    ];
    let out = hml(dir.path(), &args);
    assert!(out.status.success());
    let preds: Vec<_> = std::fs::read_dir(dir.path().join("run/gen/predictions"))
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.clone(), std::fs::read(p).unwrap())
        })
        .collect();
    assert!(!preds.is_empty());

    // Re-running with identical inputs rewrites identical bytes.
    let out = hml(dir.path(), &args);
    assert!(out.status.success());
    for (path, before) in preds {
        assert_eq!(std::fs::read(&path).unwrap(), before);
    }
}

#[test]
fn grad_check_prints_error_and_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let out = hml(dir.path(), &["grad-check", "--layers", "2", "--hidden", "8", "--frames", "10"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("max relative error"),
        "missing report: {stdout}"
    );
    // An unreachable threshold makes the same invocation fail.
    let out = hml(dir.path(), &[
        "grad-check",
        "--layers", "2",
        "--hidden", "8",
        "--frames", "10",
        "--threshold", "1e-12",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn every_out_dir_carries_provenance() {
    let dir = tempfile::tempdir().unwrap();
    setup_small_run(dir.path());
    for sub in ["data", "run", "run/model_det"] {
        let config = dir.path().join(sub).join("config.json");
        let text = std::fs::read_to_string(&config)
            .unwrap_or_else(|e| panic!("missing {}: {e}", config.display()));
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(doc.get("command").is_some());
        assert!(doc.get("args").is_some());
    }
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    setup_small_run(dir.path());
    let out = hml(dir.path(), &[
        "predict",
        "--checkpoint", "run/model_det/checkpoint.json",
        "--manifest", "run/manifest.json",
        "--data", "run",
        "--out", "run/gen",
    ]);
    assert!(out.status.success());

    let evaluate = |threads: &str, out_dir: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_hml"))
            .current_dir(dir.path())
            .env("HML_THREADS", threads)
            .args([
                "evaluate",
                "--manifest", "run/manifest.json",
                "--data", "run",
                "--predictions", "run/gen/predictions",
                "--out", out_dir,
            ])
            .output()
            .expect("spawning hml");
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(dir.path().join(out_dir).join("metrics.csv")).unwrap()
    };
    let single = evaluate("1", "run/eval1");
    let parallel = evaluate("4", "run/eval4");
    assert_eq!(single, parallel);
}

#[test]
fn missing_input_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = hml(dir.path(), &[
        "segment",
        "--corpus", "does-not-exist.json",
        "--out", "run",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).trim().is_empty());
}
