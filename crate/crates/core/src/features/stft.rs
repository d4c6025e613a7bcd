//! Short-time power spectra.
//!
//! Framing follows the Whisper front end: the signal is reflect-padded by
//! `fft_size / 2` on both sides, frames start every `hop_length` samples, and
//! the final frame is dropped, giving `len / hop_length` frames.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Window {
    /// Periodic Hann window.
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_length: usize,
    pub hop_length: usize,
    pub fft_size: usize,
    pub window: Window,
}

impl Default for StftConfig {
    /// 25 ms window, 10 ms hop at 16 kHz.
    fn default() -> Self {
        Self {
            window_length: 400,
            hop_length: 160,
            fft_size: 400,
            window: Window::Hann,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hop_length == 0
            || self.hop_length > self.window_length
            || self.window_length > self.fft_size
        {
            return Err(Error::Config(format!(
                "STFT needs 0 < hop ({}) <= window ({}) <= fft ({})",
                self.hop_length, self.window_length, self.fft_size
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Analysis window zero-padded (centered) to `fft_size`.
    pub fn padded_window(&self) -> Vec<f64> {
        let n = self.window_length;
        let offset = (self.fft_size - n) / 2;
        let mut w = vec![0.0; self.fft_size];
        for i in 0..n {
            w[offset + i] = match self.window {
                Window::Hann => {
                    0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()
                }
            };
        }
        w
    }

    pub fn n_frames(&self, len: usize) -> usize {
        len / self.hop_length
    }
}

/// Frames × bins power spectrogram, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrogram {
    pub frames: usize,
    pub bins: usize,
    pub power: Vec<f64>,
}

impl PowerSpectrogram {
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.power[t * self.bins..(t + 1) * self.bins]
    }
}

/// Reflect-pads `x` by `pad` on each side (numpy/torch "reflect" mode).
pub(crate) fn reflect_pad(x: &[f32], pad: usize) -> Vec<f64> {
    let n = x.len() as isize;
    let mut out = Vec::with_capacity(x.len() + 2 * pad);
    for i in -(pad as isize)..(n + pad as isize) {
        let mut j = i;
        if j < 0 {
            j = -j;
        }
        if j >= n {
            j = 2 * (n - 1) - j;
        }
        out.push(x[j as usize] as f64);
    }
    out
}

/// Power spectrogram `|STFT|²` of `samples`.
pub fn power_spectrogram(samples: &[f32], cfg: &StftConfig) -> Result<PowerSpectrogram> {
    cfg.validate()?;
    let pad = cfg.fft_size / 2;
    if samples.len() < cfg.window_length || samples.len() <= pad {
        return Err(Error::TooShort {
            len: samples.len(),
            window: cfg.window_length.max(pad + 1),
        });
    }
    let padded = reflect_pad(samples, pad);
    let window = cfg.padded_window();
    let frames = cfg.n_frames(samples.len());
    let bins = cfg.n_bins();
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(cfg.fft_size);

    let mut power = Vec::with_capacity(frames * bins);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for t in 0..frames {
        let start = t * cfg.hop_length;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(padded[start + i] * window[i], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        power.extend(buf[..bins].iter().map(|c| c.norm_sqr()));
    }
    Ok(PowerSpectrogram {
        frames,
        bins,
        power,
    })
}
