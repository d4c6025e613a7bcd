//! Front ends on a synthetic sung note: the 80-bin encoder log-mel, MFCC,
//! LFCC and CQCC, and a round trip through the binary feature dump.
//!
//!     cargo run --release --example features

use svdd::features::{
    cqcc, encoder_input, lfcc, mfcc, read_feature_file, whisper_log_mel, write_feature_file, CqConfig, StftConfig,
};
use svdd::{FeatureMatrix, Waveform};

/// Two seconds of a 220 Hz note with five harmonics and light vibrato.
pub fn note() -> Waveform {
    let sr = 16_000.0;
    let samples = (0..32_000)
        .map(|n| {
            let t = n as f64 / sr;
            let phase = 2.0 * std::f64::consts::PI * (220.0 * t + 0.3 * (2.0 * std::f64::consts::PI * 5.5 * t).sin());
            let s: f64 = (1..=5).map(|h| (h as f64 * phase).sin() / h as f64).sum();
            (0.3 * s) as f32
        })
        .collect();
    Waveform::new(samples, 16_000).unwrap()
}

pub fn run_example() -> svdd::Result<Vec<FeatureMatrix>> {
    let w = note();
    let stft = StftConfig::default();
    let feats = vec![
        whisper_log_mel(&w)?,
        encoder_input(&w)?,
        mfcc(&w, &stft, 40, 20)?,
        lfcc(&w, &stft, 40, 20)?,
        cqcc(&w, &CqConfig::default())?,
    ];
    for f in &feats {
        println!("{:<8} {:>5} frames x {:>3} at {:.0} frames/s", f.kind.as_str(), f.rows(), f.cols(), f.frame_rate);
    }

    let dir = tempfile::tempdir().map_err(|e| svdd::Error::Config(e.to_string()))?;
    let path = dir.path().join("note.feat");
    write_feature_file(&path, &feats[2])?;
    let back = read_feature_file(&path)?;
    println!("dump round trip identical: {}", back == feats[2]);
    Ok(feats)
}

#[allow(dead_code)]
fn main() -> svdd::Result<()> {
    run_example().map(drop)
}
