//! Front-end feature extraction: STFT, Whisper-convention log-mel
//! spectrograms, MFCC/LFCC/CQCC cepstra and energy VAD segmentation.

mod cepstral;
mod cqcc;
pub mod dct;
mod dump;
pub mod filterbank;
pub mod stft;
mod vad;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cepstral::{log_mel_spectrogram, mfcc, lfcc, whisper_log_mel, LOG_FLOOR};
pub use cqcc::{cqcc, constant_q_power, CqConfig, CqKernel};
pub use dump::{read_feature_file, write_feature_file};
pub use stft::{power_spectrogram, PowerSpectrogram, StftConfig, Window};
pub use vad::{segment_by_vad, VadConfig};

/// Sample rate of every model-facing front end.
pub const SAMPLE_RATE: u32 = 16_000;
/// Mel bins of the encoder input.
pub const N_MELS: usize = 80;
/// 30 s at 16 kHz.
pub const CHUNK_SAMPLES: usize = 30 * SAMPLE_RATE as usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    LogMel,
    #[serde(rename = "MFCC")]
    Mfcc,
    #[serde(rename = "LFCC")]
    Lfcc,
    #[serde(rename = "CQCC")]
    Cqcc,
    Encoding,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::LogMel => "LogMel",
            FeatureKind::Mfcc => "MFCC",
            FeatureKind::Lfcc => "LFCC",
            FeatureKind::Cqcc => "CQCC",
            FeatureKind::Encoding => "Encoding",
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "LogMel" => FeatureKind::LogMel,
            "MFCC" => FeatureKind::Mfcc,
            "LFCC" => FeatureKind::Lfcc,
            "CQCC" => FeatureKind::Cqcc,
            "Encoding" => FeatureKind::Encoding,
            other => return Err(Error::Config(format!("unknown feature kind `{other}`"))),
        })
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A time × coefficient matrix, stored row-major (one row per frame).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Vec<f32>,
    rows: usize,
    cols: usize,
    pub frame_rate: f64,
    pub kind: FeatureKind,
    pub source_clip: String,
}

impl FeatureMatrix {
    /// Builds a matrix, rejecting empty shapes and non-finite values.
    pub fn new(
        values: Vec<f32>,
        rows: usize,
        cols: usize,
        frame_rate: f64,
        kind: FeatureKind,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("feature matrix {rows}x{cols} is empty")));
        }
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} feature matrix",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{kind} feature matrix")));
        }
        Ok(Self {
            values,
            rows,
            cols,
            frame_rate,
            kind,
            source_clip: String::new(),
        })
    }

    pub fn with_clip(mut self, clip: impl Into<String>) -> Self {
        self.source_clip = clip.into();
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.values[t * self.cols..(t + 1) * self.cols]
    }

    pub fn get(&self, t: usize, d: usize) -> f32 {
        self.values[t * self.cols + d]
    }
}

/// Pads with silence or trims `w` to 30 s and returns its 80-bin
/// encoder-input log-mel spectrogram (3000 frames).
pub fn encoder_input(w: &crate::audio::Waveform) -> Result<FeatureMatrix> {
    whisper_log_mel(&w.pad_or_trim(CHUNK_SAMPLES))
}
