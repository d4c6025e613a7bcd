//! Waveform container, WAV input/output and band-limited resampling.

use std::path::Path;

use crate::error::{Error, Result};

/// Mono audio at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub(crate) fn ensure_non_empty(&self) -> Result<()> {
        if self.samples.is_empty() {
            Err(Error::EmptyAudio)
        } else {
            Ok(())
        }
    }

    /// Pads with trailing zeros or truncates to exactly `n` samples.
    pub fn pad_or_trim(&self, n: usize) -> Waveform {
        let mut samples = self.samples.clone();
        samples.resize(n, 0.0);
        Waveform {
            samples,
            sample_rate: self.sample_rate,
        }
    }

    /// Cuts `[start_s, end_s)` out of the waveform, clamped to its bounds.
    pub fn slice_seconds(&self, start_s: f64, end_s: f64) -> Waveform {
        let sr = self.sample_rate as f64;
        let a = ((start_s * sr).round().max(0.0) as usize).min(self.samples.len());
        let b = ((end_s * sr).round().max(0.0) as usize).clamp(a, self.samples.len());
        Waveform {
            samples: self.samples[a..b].to_vec(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn resampled(&self, target_rate: u32) -> Result<Waveform> {
        if target_rate == 0 {
            return Err(Error::Config("target sample rate must be positive".into()));
        }
        Ok(Waveform {
            samples: resample(&self.samples, self.sample_rate, target_rate),
            sample_rate: target_rate,
        })
    }
}

/// Reads a PCM WAV file (16-bit integer or 32-bit float, mono or stereo),
/// downmixes to mono and resamples to `target_rate`.
pub fn load_audio(path: impl AsRef<Path>, target_rate: u32) -> Result<Waveform> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(source) => Error::io(path, source),
        other => Error::Audio {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 || channels > 2 {
        return Err(Error::UnsupportedEncoding(format!(
            "{channels} channels (mono or stereo only)"
        )));
    }
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<std::result::Result<_, _>>(),
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .collect::<std::result::Result<_, _>>(),
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "{bits}-bit {fmt:?} (16-bit int or 32-bit float only)"
            )))
        }
    }
    .map_err(|e| Error::Audio {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;

    let mono: Vec<f32> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(2)
            .map(|c| 0.5 * (c[0] + c[1]))
            .collect()
    };
    if mono.is_empty() {
        return Err(Error::EmptyAudio);
    }
    Waveform::new(mono, spec.sample_rate)?.resampled(target_rate)
}

/// Writes a mono 16-bit PCM WAV file.
pub fn save_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wrap = |e: hound::Error| match e {
        hound::Error::IoError(source) => Error::io(path, source),
        other => Error::Audio {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wrap)?;
    for &s in &w.samples {
        writer
            .write_sample(quantize_i16(s))
            .map_err(wrap)?;
    }
    writer.finalize().map_err(wrap)
}

pub(crate) fn quantize_i16(s: f32) -> i16 {
    (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Zero crossings of the sinc kernel on each side, counted at the lower of
/// the two rates (64 taps in total).
pub const RESAMPLE_ZERO_CROSSINGS: usize = 32;
/// Kaiser window shape parameter.
pub const RESAMPLE_KAISER_BETA: f64 = 8.6;
/// Passband edge as a fraction of the lower Nyquist frequency.
pub const RESAMPLE_ROLLOFF: f64 = 0.945;
const TABLE_OVERSAMPLE: usize = 512;

/// Windowed-sinc resampler (Kaiser window, 64 taps at the lower rate).
///
/// The output has `round(len * to / from)` samples. The kernel is tabulated
/// at 512 points per zero crossing and linearly interpolated.
pub fn resample(x: &[f32], from: u32, to: u32) -> Vec<f32> {
    if from == to || x.is_empty() {
        return x.to_vec();
    }
    let ratio = to as f64 / from as f64;
    let out_len = (x.len() as f64 * ratio).round() as usize;
    // Cutoff relative to the input Nyquist frequency.
    let fc = ratio.min(1.0) * RESAMPLE_ROLLOFF;
    let table = kernel_table();
    // Half support in input samples.
    let half = RESAMPLE_ZERO_CROSSINGS as f64 / fc;

    let mut y = Vec::with_capacity(out_len);
    for n in 0..out_len {
        let t = n as f64 / ratio;
        let lo = ((t - half).ceil().max(0.0)) as usize;
        let hi = ((t + half).floor() as usize).min(x.len() - 1);
        let mut acc = 0.0f64;
        for (j, &xj) in x.iter().enumerate().take(hi + 1).skip(lo) {
            let u = ((t - j as f64) * fc).abs();
            acc += xj as f64 * kernel_lookup(&table, u);
        }
        y.push((acc * fc) as f32);
    }
    y
}

fn kernel_table() -> Vec<f64> {
    let n = RESAMPLE_ZERO_CROSSINGS * TABLE_OVERSAMPLE + 2;
    let norm = bessel_i0(RESAMPLE_KAISER_BETA);
    (0..n)
        .map(|i| {
            let u = i as f64 / TABLE_OVERSAMPLE as f64;
            let r = u / RESAMPLE_ZERO_CROSSINGS as f64;
            if r > 1.0 {
                return 0.0;
            }
            let win = bessel_i0(RESAMPLE_KAISER_BETA * (1.0 - r * r).sqrt()) / norm;
            sinc(u) * win
        })
        .collect()
}

fn kernel_lookup(table: &[f64], u: f64) -> f64 {
    let pos = u * TABLE_OVERSAMPLE as f64;
    let i = pos.floor() as usize;
    if i + 1 >= table.len() {
        return 0.0;
    }
    let frac = pos - i as f64;
    table[i] + frac * (table[i + 1] - table[i])
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let q = (x / 2.0) * (x / 2.0);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, rate: u32, secs: f64) -> Vec<f32> {
        let n = (rate as f64 * secs) as usize;
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin() as f32 * 0.5)
            .collect()
    }

    #[test]
    fn silence_resamples_to_exact_zeros() {
        let y = resample(&vec![0.0; 44100], 44100, 16000);
        assert_eq!(y.len(), 16000);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_rate_is_identity() {
        let x = sine(440.0, 16000, 0.1);
        assert_eq!(resample(&x, 16000, 16000), x);
    }

    #[test]
    fn upsampled_tone_keeps_amplitude() {
        let x = sine(440.0, 8000, 0.5);
        let y = resample(&x, 8000, 16000);
        assert_eq!(y.len(), 8000);
        // Interior samples should track the analytic tone closely.
        let mut max_err = 0.0f64;
        for (n, &v) in y.iter().enumerate().skip(1000).take(6000) {
            let t = n as f64 / 16000.0;
            let want = 0.5 * (2.0 * std::f64::consts::PI * 440.0 * t).sin();
            max_err = max_err.max((v as f64 - want).abs());
        }
        assert!(max_err < 5e-3, "max error {max_err}");
    }

    #[test]
    fn downsampling_rejects_content_above_new_nyquist() {
        // 7 kHz is above the 4 kHz Nyquist of an 8 kHz target.
        let x = sine(7000.0, 16000, 0.5);
        let y = resample(&x, 16000, 8000);
        let rms = (y[500..3500].iter().map(|v| (*v as f64).powi(2)).sum::<f64>() / 3000.0).sqrt();
        assert!(rms < 1e-3, "alias rms {rms}");
    }

    #[test]
    fn bessel_i0_known_values() {
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-12);
    }

    #[test]
    fn wav_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let w = Waveform::new(sine(440.0, 16000, 0.25), 16000).unwrap();
        save_wav(&p, &w).unwrap();
        let back = load_audio(&p, 16000).unwrap();
        assert_eq!(back.len(), w.len());
        for (a, b) in back.samples.iter().zip(&w.samples) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }

        assert!(matches!(
            load_audio(dir.path().join("missing.wav"), 16000),
            Err(Error::Io { .. })
        ));

        let bad = dir.path().join("bad.wav");
        std::fs::write(&bad, b"not a wav file at all").unwrap();
        assert!(matches!(load_audio(&bad, 16000), Err(Error::Audio { .. })));

        let empty = dir.path().join("empty.wav");
        save_wav(&empty, &Waveform::new(vec![], 16000).unwrap()).unwrap();
        assert!(matches!(load_audio(&empty, 16000), Err(Error::EmptyAudio)));
    }

    #[test]
    fn stereo_is_averaged_and_8bit_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("st.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 22050,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut wr = hound::WavWriter::create(&p, spec).unwrap();
        for v in sine(300.0, 22050, 0.2) {
            wr.write_sample(v).unwrap();
            wr.write_sample(-v).unwrap();
        }
        wr.finalize().unwrap();
        let w = load_audio(&p, 16000).unwrap();
        assert_eq!(w.sample_rate, 16000);
        assert!(w.samples.iter().all(|&v| v == 0.0));

        let p8 = dir.path().join("u8.wav");
        let spec8 = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 8,
            sample_format: hound::SampleFormat::Int,
        };
        let mut wr = hound::WavWriter::create(&p8, spec8).unwrap();
        wr.write_sample(3i8).unwrap();
        wr.finalize().unwrap();
        assert!(matches!(
            load_audio(&p8, 16000),
            Err(Error::UnsupportedEncoding(_))
        ));
    }
}
