//! Constant-Q cepstral coefficients.
//!
//! The constant-Q transform uses precomputed spectral kernels: each bin's
//! Hann-windowed complex exponential is transformed once, sparsified, and
//! correlated with the FFT of every analysis frame. Log power on the
//! geometric axis is then linearly interpolated onto a uniform frequency grid
//! of twice the bin count before the DCT.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};

use super::dct::Dct;
use super::{FeatureKind, FeatureMatrix, LOG_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CqConfig {
    pub bins_per_octave: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub hop_length: usize,
    pub n_coeffs: usize,
}

impl Default for CqConfig {
    fn default() -> Self {
        Self {
            bins_per_octave: 24,
            fmin: 62.5,
            fmax: 8000.0,
            hop_length: 160,
            n_coeffs: 20,
        }
    }
}

impl CqConfig {
    pub fn quality(&self) -> f64 {
        1.0 / (2f64.powf(1.0 / self.bins_per_octave as f64) - 1.0)
    }

    pub fn n_bins(&self) -> usize {
        (self.bins_per_octave as f64 * (self.fmax / self.fmin).log2() + 1e-9).floor() as usize + 1
    }

    pub fn bin_frequency(&self, k: usize) -> f64 {
        self.fmin * 2f64.powf(k as f64 / self.bins_per_octave as f64)
    }

    fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = sample_rate as f64 / 2.0;
        if !(self.fmin > 0.0 && self.fmin < self.fmax && self.fmax <= nyquist) {
            return Err(Error::Config(format!(
                "constant-Q range needs 0 < fmin ({}) < fmax ({}) <= nyquist ({nyquist})",
                self.fmin, self.fmax
            )));
        }
        if self.bins_per_octave == 0 || self.hop_length == 0 {
            return Err(Error::Config(
                "bins_per_octave and hop_length must be positive".into(),
            ));
        }
        if self.n_coeffs == 0 || self.n_coeffs > 2 * self.n_bins() {
            return Err(Error::Config(format!(
                "n_coeffs must be in 1..={}",
                2 * self.n_bins()
            )));
        }
        Ok(())
    }
}

/// Relative magnitude below which spectral-kernel entries are dropped.
const SPARSITY: f64 = 1e-4;

/// Sparse spectral kernels for one configuration and sample rate.
pub struct CqKernel {
    cfg: CqConfig,
    fft_size: usize,
    fft: Arc<dyn Fft<f64>>,
    kernels: Vec<Vec<(usize, Complex<f64>)>>,
}

impl CqKernel {
    pub fn new(sample_rate: u32, cfg: CqConfig) -> Result<Self> {
        cfg.validate(sample_rate)?;
        let q = cfg.quality();
        let n_bins = cfg.n_bins();
        let longest = (q * sample_rate as f64 / cfg.fmin).ceil() as usize;
        let fft_size = longest.next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(fft_size);

        let mut kernels = Vec::with_capacity(n_bins);
        for k in 0..n_bins {
            let len = (q * sample_rate as f64 / cfg.bin_frequency(k)).ceil() as usize;
            let offset = (fft_size - len) / 2;
            let mut buf = vec![Complex::new(0.0, 0.0); fft_size];
            for n in 0..len {
                let win = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos();
                let phase = 2.0 * std::f64::consts::PI * q * n as f64 / len as f64;
                buf[offset + n] = Complex::from_polar(win / len as f64, phase);
            }
            fft.process(&mut buf);
            let peak = buf.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let sparse = buf
                .into_iter()
                .enumerate()
                .filter(|(_, c)| c.norm() >= peak * SPARSITY)
                .map(|(j, c)| (j, c.conj() / fft_size as f64))
                .collect();
            kernels.push(sparse);
        }
        Ok(Self {
            cfg,
            fft_size,
            fft,
            kernels,
        })
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn n_bins(&self) -> usize {
        self.kernels.len()
    }

    /// Sample index of the first kernel tap for bin `k` in a frame centered
    /// at `center`.
    pub fn kernel_start(&self, k: usize, sample_rate: u32, center: usize) -> isize {
        let len = (self.cfg.quality() * sample_rate as f64 / self.cfg.bin_frequency(k)).ceil() as usize;
        center as isize - (self.fft_size / 2) as isize + ((self.fft_size - len) / 2) as isize
    }

    /// Frames × bins constant-Q power, frame `m` centered at `m * hop`.
    pub fn power(&self, samples: &[f32]) -> Vec<Vec<f64>> {
        let frames = samples.len() / self.cfg.hop_length;
        let half = self.fft_size as isize / 2;
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_size];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut out = Vec::with_capacity(frames);
        for m in 0..frames {
            let start = (m * self.cfg.hop_length) as isize - half;
            for (j, slot) in buf.iter_mut().enumerate() {
                let idx = start + j as isize;
                let v = if idx >= 0 && (idx as usize) < samples.len() {
                    samples[idx as usize] as f64
                } else {
                    0.0
                };
                *slot = Complex::new(v, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            out.push(
                self.kernels
                    .iter()
                    .map(|kernel| {
                        kernel
                            .iter()
                            .map(|&(j, s)| buf[j] * s)
                            .sum::<Complex<f64>>()
                            .norm_sqr()
                    })
                    .collect(),
            );
        }
        out
    }
}

/// Frames × bins constant-Q power spectrogram.
pub fn constant_q_power(w: &Waveform, cfg: &CqConfig) -> Result<Vec<Vec<f64>>> {
    w.ensure_non_empty()?;
    let kernel = CqKernel::new(w.sample_rate, *cfg)?;
    if w.len() < cfg.hop_length {
        return Err(Error::TooShort {
            len: w.len(),
            window: cfg.hop_length,
        });
    }
    Ok(kernel.power(&w.samples))
}

/// Linearly interpolates geometric-axis values onto `2 * n_bins` uniformly
/// spaced frequencies between the first and last bin centers.
pub(crate) fn uniform_resample(log_power: &[f64], cfg: &CqConfig) -> Vec<f64> {
    let n_bins = log_power.len();
    let n_out = 2 * n_bins;
    let f_lo = cfg.bin_frequency(0);
    let f_hi = cfg.bin_frequency(n_bins - 1);
    (0..n_out)
        .map(|i| {
            let f = f_lo + (f_hi - f_lo) * i as f64 / (n_out - 1) as f64;
            let pos = (cfg.bins_per_octave as f64 * (f / cfg.fmin).log2()).clamp(0.0, (n_bins - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n_bins - 1);
            let frac = pos - lo as f64;
            log_power[lo] * (1.0 - frac) + log_power[hi] * frac
        })
        .collect()
}

pub fn cqcc(w: &Waveform, cfg: &CqConfig) -> Result<FeatureMatrix> {
    let power = constant_q_power(w, cfg)?;
    let n_bins = cfg.n_bins();
    let dct = Dct::new(2 * n_bins);
    let mut values = Vec::with_capacity(power.len() * cfg.n_coeffs);
    for frame in &power {
        let logs: Vec<f64> = frame.iter().map(|&p| p.max(LOG_FLOOR).ln()).collect();
        let uniform = uniform_resample(&logs, cfg);
        values.extend(dct.forward(&uniform, cfg.n_coeffs).into_iter().map(|c| c as f32));
    }
    FeatureMatrix::new(
        values,
        power.len(),
        cfg.n_coeffs,
        w.sample_rate as f64 / cfg.hop_length as f64,
        FeatureKind::Cqcc,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quality_and_bin_count() {
        let cfg = CqConfig {
            bins_per_octave: 12,
            fmin: 100.0,
            fmax: 800.0,
            ..Default::default()
        };
        assert_eq!(cfg.n_bins(), 37);
        assert!((cfg.quality() - 16.817_153_745_105_756).abs() < 1e-9);
        assert!((cfg.bin_frequency(12) - 200.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_ranges_are_rejected() {
        let w = Waveform::new(vec![0.0; 1600], 16000).unwrap();
        for (lo, hi) in [(0.0, 1000.0), (500.0, 400.0), (100.0, 9000.0)] {
            let cfg = CqConfig {
                fmin: lo,
                fmax: hi,
                ..Default::default()
            };
            assert!(matches!(cqcc(&w, &cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn resampling_a_constant_is_constant() {
        let cfg = CqConfig::default();
        let v = uniform_resample(&vec![-3.0; cfg.n_bins()], &cfg);
        assert_eq!(v.len(), 2 * cfg.n_bins());
        assert!(v.iter().all(|&x| (x + 3.0).abs() < 1e-12));
    }
}
