use std::path::Path;
use std::process::Command;

use svdd::data::synth::SurrogateConfig;
use svdd::data::Partition;
use svdd::pipeline::{ExperimentConfig, SystemFeature};

fn svdd_split(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_svdd")).args(args).output().unwrap();
    let text = |b: &[u8]| String::from_utf8_lossy(b).into_owned();
    (out.status.success(), text(&out.stdout), text(&out.stderr))
}

fn svdd(args: &[&str]) -> (bool, String) {
    let (ok, out, err) = svdd_split(args);
    (ok, out + &err)
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_validate_train_eval_report() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let small = SurrogateConfig {
        counts: vec![
            (Partition::Train, 12, 12),
            (Partition::Val, 4, 4),
            (Partition::T01, 4, 4),
            (Partition::T02, 3, 3),
            (Partition::T04, 4, 4),
        ],
        clip_seconds: 1.5,
        ..Default::default()
    };
    std::fs::write(root.join("synth.json"), serde_json::to_vec(&small).unwrap()).unwrap();
    std::fs::write(root.join("counts.json"), serde_json::to_vec(&small.expected_counts()).unwrap()).unwrap();
    let corpus = root.join("corpus");
    let (ok, text) = svdd(&["synth", "--out", path(&corpus), "--seed", "3", "--config", path(&root.join("synth.json"))]);
    assert!(ok, "{text}");
    let manifest = corpus.join("manifest.csv");

    let (ok, text) = svdd(&["validate", "--manifest", path(&manifest), "--counts", path(&root.join("counts.json"))]);
    assert!(ok, "{text}");
    let (ok, text) = svdd(&["validate", "--manifest", path(&manifest)]);
    assert!(!ok);
    assert!(text.contains("expected 5251/4519"), "{text}");

    let mut cfg = ExperimentConfig::new(SystemFeature::Mfcc);
    cfg.train.max_epochs = 2;
    cfg.cache_dir = Some(root.join("cache"));
    let exp = root.join("exp.json");
    std::fs::write(&exp, serde_json::to_vec(&cfg).unwrap()).unwrap();
    let run = root.join("run");
    let common = ["--config", path(&exp), "--manifest", path(&manifest), "--out", path(&run)];
    for cmd in ["extract", "train", "eval"] {
        let args: Vec<&str> = std::iter::once(cmd).chain(common.iter().copied()).collect();
        let (ok, text) = svdd(&args);
        assert!(ok, "{cmd}: {text}");
    }
    // A second extraction finds everything cached.
    let args: Vec<&str> = std::iter::once("extract").chain(common.iter().copied()).collect();
    let (_, text, _) = svdd_split(&args);
    let summary: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(summary["computed"], 0);

    for f in ["head.svdd", "head.svdd.json", "history.json", "report.json", "report.csv", "scores/T03.csv"] {
        assert!(run.join(f).exists(), "{f} missing");
    }
    let figs = root.join("figs");
    let (ok, text) = svdd(&["report", path(&run), "--out", path(&figs)]);
    assert!(ok, "{text}");
    let table = std::fs::read_to_string(figs.join("figure_data.csv")).unwrap();
    assert!(table.lines().any(|l| l.contains("MFCC") && l.contains("T04")), "{table}");
}

#[test]
fn bad_input_fails_with_a_message() {
    let (ok, text) = svdd(&["validate", "--manifest", "/nonexistent/manifest.csv"]);
    assert!(!ok);
    assert!(text.contains("/nonexistent/manifest.csv"), "{text}");
    let (ok, _) = svdd(&["train"]);
    assert!(!ok);
}
