//! End-to-end run on the synthetic surrogate corpus: generate audio, encode
//! it with a seeded two-block toy encoder, train the CNN head and evaluate
//! every partition.
//!
//!     cargo run --release --example desk_pipeline [out_dir]

use std::path::{Path, PathBuf};

use svdd::data::synth::{generate_surrogate, SurrogateConfig};
use svdd::encoder::{EncoderConfig, ModelSize};
use svdd::eval::EvalReport;
use svdd::pipeline::{cmd_eval, cmd_train, ExperimentConfig, SystemFeature};

pub fn desk_config(root: &Path, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(SystemFeature::Whisper(ModelSize::Custom));
    cfg.encoder = Some(EncoderConfig::custom(2, 8, 2, 80, 3000));
    cfg.manifest = Some(root.join("corpus/manifest.csv"));
    cfg.out_dir = Some(root.join("run"));
    cfg.train.max_epochs = 5;
    cfg.seed = seed;
    cfg
}

pub fn run_desk(root: &Path, seed: u64) -> svdd::Result<EvalReport> {
    generate_surrogate(&SurrogateConfig { seed, ..Default::default() }, &root.join("corpus"))?;
    let cfg = desk_config(root, seed);
    let trained = cmd_train(&cfg)?;
    for e in &trained.history {
        println!("epoch {}: train loss {:.4}, val EER {:.2}%", e.epoch, e.train_loss, 100.0 * e.val_eer);
    }
    cmd_eval(&cfg)
}

pub fn run_example(out_dir: Option<PathBuf>) -> svdd::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| svdd::Error::Config(e.to_string()))?;
    let root = out_dir.unwrap_or_else(|| dir.path().to_path_buf());
    let report = run_desk(&root, 7)?;
    for p in &report.partitions {
        println!("{:<6} EER {:6.2}%", p.partition.as_str(), p.eer_percent);
    }
    println!("test average {:.2}%", report.average_test_eer_percent.unwrap_or(f64::NAN));
    Ok(())
}

#[allow(dead_code)]
fn main() -> svdd::Result<()> {
    run_example(std::env::args().nth(1).map(Into::into))
}
