//! Encoder weights through the tensor archive, then encodings for a clip.
//! Pass a converted checkpoint and its size to use real weights:
//!
//!     cargo run --release --example encoder [weights.svdd tiny|base|small|medium]

use svdd::encoder::{load_weights, Encoder, EncoderConfig, EncoderWeights, ModelSize};
use svdd::features::encoder_input;
use svdd::Waveform;

pub fn run_example(args: &[String]) -> svdd::Result<(usize, usize)> {
    let encoder = if let [path, size] = args {
        let cfg = EncoderConfig::named(size.parse::<ModelSize>()?)?;
        Encoder::new(cfg, load_weights(path, &cfg)?)?
    } else {
        // Two blocks of width 16 over the full 30 s window.
        let cfg = EncoderConfig::custom(2, 16, 2, 80, 3000);
        let weights = EncoderWeights::random(&cfg, 3)?;
        let dir = tempfile::tempdir().map_err(|e| svdd::Error::Config(e.to_string()))?;
        let path = dir.path().join("custom.svdd");
        weights.to_archive(&cfg)?.save(&path)?;
        println!("{} parameters written to and reloaded from {}", cfg.parameter_count(), path.display());
        Encoder::new(cfg, load_weights(&path, &cfg)?)?
    };

    let clip: Vec<f32> = (0..48_000).map(|n| (n as f32 * 0.07).sin() * 0.3).collect();
    let mel = encoder_input(&Waveform::new(clip, 16_000)?)?;
    let enc = encoder.encode(&mel)?;
    println!(
        "{} mel frames -> {} encoding frames of width {}",
        mel.rows(),
        enc.values.rows,
        enc.values.cols
    );
    Ok((enc.values.rows, enc.values.cols))
}

#[allow(dead_code)]
fn main() -> svdd::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    run_example(&args).map(drop)
}
