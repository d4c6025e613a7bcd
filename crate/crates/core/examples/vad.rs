//! Energy VAD on a recording with three phrases separated by silence.
//!
//!     cargo run --release --example vad

use svdd::features::{segment_by_vad, VadConfig};
use svdd::Waveform;

pub fn run_example() -> svdd::Result<Vec<(f64, f64)>> {
    let sr = 16_000;
    // Phrases at 0.5-2.5 s, 3.5-6.0 s and 7.0-7.5 s; the last is too short to keep.
    let phrases = [(0.5, 2.5), (3.5, 6.0), (7.0, 7.5)];
    let samples = (0..8 * sr)
        .map(|n| {
            let t = n as f64 / sr as f64;
            let on = phrases.iter().any(|&(a, b)| t >= a && t < b);
            let tone = (2.0 * std::f64::consts::PI * 330.0 * t).sin() * 0.4;
            let hiss = ((n as f64 * 12.9898).sin() * 43758.5453).fract() * 1e-4;
            (if on { tone } else { 0.0 } + hiss) as f32
        })
        .collect();
    let w = Waveform::new(samples, sr as u32)?;
    let segments = segment_by_vad(&w, &VadConfig::default())?;
    for (a, b) in &segments {
        println!("voiced {a:5.2} s .. {b:5.2} s");
    }
    Ok(segments)
}

#[allow(dead_code)]
fn main() -> svdd::Result<()> {
    run_example().map(drop)
}
