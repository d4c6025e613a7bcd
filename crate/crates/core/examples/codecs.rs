//! Runs a clip through every built-in telephony codec and shows how much of
//! the signal survives below and above 4 kHz.
//!
//!     cargo run --release --example codecs

use svdd::data::{codec_augment, CodecRegistry};
use svdd::features::{power_spectrogram, StftConfig};
use svdd::Waveform;

/// Total power below and above 4 kHz.
fn band_energy(w: &Waveform) -> svdd::Result<(f64, f64)> {
    let cfg = StftConfig::default();
    let spec = power_spectrogram(&w.samples, &cfg)?;
    let split = 4000 * cfg.fft_size / 16_000;
    let (mut low, mut high) = (0.0, 0.0);
    for t in 0..spec.frames {
        for (k, p) in spec.frame(t).iter().enumerate() {
            if k < split { low += p } else { high += p }
        }
    }
    Ok((low, high))
}

pub fn run_example() -> svdd::Result<Vec<(String, f64, f64)>> {
    let samples: Vec<f32> = (0..16_000)
        .map(|n| {
            let t = n as f32 / 16_000.0;
            0.4 * (2.0 * std::f32::consts::PI * 1000.0 * t).sin() + 0.1 * (2.0 * std::f32::consts::PI * 6000.0 * t).sin()
        })
        .collect();
    let clean = Waveform::new(samples, 16_000)?;
    let (low0, high0) = band_energy(&clean)?;
    let registry = CodecRegistry::builtin();
    let mut out = Vec::new();
    for tag in registry.tags() {
        let coded = codec_augment(&clean, &tag, &registry)?;
        let (low, high) = band_energy(&coded)?;
        let (low_db, high_db) = (10.0 * (low / low0).log10(), 10.0 * (high / high0).log10());
        println!("{tag:<11} {} samples; below 4 kHz {low_db:+7.2} dB, above {high_db:+7.2} dB", coded.len());
        out.push((tag, low_db, high_db));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> svdd::Result<()> {
    run_example().map(drop)
}
