use crate::audio::Waveform;
use crate::error::{Error, Result};

use super::dct::Dct;
use super::filterbank::Filterbank;
use super::stft::{power_spectrogram, StftConfig};
use super::{FeatureKind, FeatureMatrix, N_MELS, SAMPLE_RATE};

/// Floor applied to filter energies before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-10;

/// Dynamic range kept below the per-clip maximum, in log10 units.
const DYNAMIC_RANGE: f64 = 8.0;

fn filter_energies(w: &Waveform, cfg: &StftConfig, fb: &Filterbank) -> Result<(Vec<Vec<f64>>, f64)> {
    w.ensure_non_empty()?;
    let spec = power_spectrogram(&w.samples, cfg)?;
    let energies = (0..spec.frames).map(|t| fb.apply(spec.frame(t))).collect();
    Ok((energies, w.sample_rate as f64 / cfg.hop_length as f64))
}

/// Log-mel spectrogram in the Whisper input convention:
/// `log10(max(mel, 1e-10))`, clamped to `max - 8`, then `(x + 4) / 4`.
pub fn log_mel_spectrogram(w: &Waveform, cfg: &StftConfig, n_mels: usize) -> Result<FeatureMatrix> {
    if w.sample_rate != SAMPLE_RATE {
        return Err(Error::Config(format!(
            "log-mel front end expects {SAMPLE_RATE} Hz audio, got {}",
            w.sample_rate
        )));
    }
    let fb = Filterbank::mel(w.sample_rate, cfg.fft_size, n_mels, 0.0, w.sample_rate as f64 / 2.0);
    let (energies, frame_rate) = filter_energies(w, cfg, &fb)?;
    let logs: Vec<f64> = energies
        .iter()
        .flatten()
        .map(|&e| e.max(LOG_FLOOR).log10())
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let values = logs
        .iter()
        .map(|&v| ((v.max(max - DYNAMIC_RANGE) + 4.0) / 4.0) as f32)
        .collect();
    FeatureMatrix::new(values, energies.len(), n_mels, frame_rate, FeatureKind::LogMel)
}

/// 80-bin log-mel with the default 400/160/400 STFT.
pub fn whisper_log_mel(w: &Waveform) -> Result<FeatureMatrix> {
    log_mel_spectrogram(w, &StftConfig::default(), N_MELS)
}

fn cepstra(
    energies: &[Vec<f64>],
    n_filters: usize,
    n_coeffs: usize,
    frame_rate: f64,
    kind: FeatureKind,
) -> Result<FeatureMatrix> {
    let dct = Dct::new(n_filters);
    let mut values = Vec::with_capacity(energies.len() * n_coeffs);
    for frame in energies {
        let logs: Vec<f64> = frame.iter().map(|&e| e.max(LOG_FLOOR).ln()).collect();
        values.extend(dct.forward(&logs, n_coeffs).into_iter().map(|c| c as f32));
    }
    FeatureMatrix::new(values, energies.len(), n_coeffs, frame_rate, kind)
}

fn check_coeffs(n_filters: usize, n_coeffs: usize) -> Result<()> {
    if n_filters == 0 || n_coeffs == 0 || n_coeffs > n_filters {
        return Err(Error::Config(format!(
            "need 0 < n_coeffs ({n_coeffs}) <= n_filters ({n_filters})"
        )));
    }
    Ok(())
}

/// Mel-frequency cepstral coefficients: orthonormal DCT-II of natural-log
/// mel energies, keeping the first `n_coeffs`.
pub fn mfcc(w: &Waveform, cfg: &StftConfig, n_mels: usize, n_coeffs: usize) -> Result<FeatureMatrix> {
    check_coeffs(n_mels, n_coeffs)?;
    let fb = Filterbank::mel(w.sample_rate, cfg.fft_size, n_mels, 0.0, w.sample_rate as f64 / 2.0);
    let (energies, rate) = filter_energies(w, cfg, &fb)?;
    cepstra(&energies, n_mels, n_coeffs, rate, FeatureKind::Mfcc)
}

/// Linear-frequency cepstral coefficients (linearly spaced triangles).
pub fn lfcc(w: &Waveform, cfg: &StftConfig, n_filters: usize, n_coeffs: usize) -> Result<FeatureMatrix> {
    check_coeffs(n_filters, n_coeffs)?;
    let fb = Filterbank::linear(w.sample_rate, cfg.fft_size, n_filters);
    let (energies, rate) = filter_energies(w, cfg, &fb)?;
    cepstra(&energies, n_filters, n_coeffs, rate, FeatureKind::Lfcc)
}
