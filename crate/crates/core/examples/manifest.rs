//! Builds a small surrogate corpus, derives its codec partition and
//! validates the manifest, then shows what a broken split looks like.
//!
//!     cargo run --release --example manifest [out_dir]

use std::path::PathBuf;

use svdd::data::synth::{generate_surrogate, SurrogateConfig};
use svdd::data::{load_manifest, validate_against_reference, validate_with_counts, Label, Partition, ValidationReport};

pub fn run_example(out_dir: Option<PathBuf>) -> svdd::Result<(ValidationReport, ValidationReport)> {
    let dir = tempfile::tempdir().map_err(|e| svdd::Error::Config(e.to_string()))?;
    let root = out_dir.unwrap_or_else(|| dir.path().to_path_buf());
    let cfg = SurrogateConfig {
        counts: vec![
            (Partition::Train, 6, 6),
            (Partition::Val, 2, 2),
            (Partition::T01, 2, 2),
            (Partition::T02, 2, 2),
            (Partition::T04, 2, 2),
        ],
        clip_seconds: 1.0,
        ..Default::default()
    };
    generate_surrogate(&cfg, &root)?;
    let manifest = load_manifest(root.join("manifest.csv"))?;
    for (p, b, f) in cfg.expected_counts() {
        println!(
            "{:<5} {:>3} bonafide {:>3} deepfake (expected {b}/{f})",
            p.as_str(),
            manifest.count(p, Label::Bonafide),
            manifest.count(p, Label::Deepfake)
        );
    }
    let own = validate_with_counts(&manifest, &cfg.expected_counts());
    println!("against its own counts: {} violations", own.violations.len());

    // Against the full-size reference split every partition count is off.
    let reference = validate_against_reference(&manifest);
    for v in &reference.violations {
        println!("  {v}");
    }
    Ok((own, reference))
}

#[allow(dead_code)]
fn main() -> svdd::Result<()> {
    run_example(std::env::args().nth(1).map(Into::into)).map(drop)
}
