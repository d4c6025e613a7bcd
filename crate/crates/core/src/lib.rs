//! Singing-voice deepfake detection toolkit.
//!
//! The detection pipeline turns audio into a log-mel spectrogram, runs it
//! through a frozen Whisper-style transformer encoder and classifies the
//! last hidden state with a small CNN or a ResNet34 head. Classical cepstral
//! front ends (MFCC, LFCC, CQCC) serve as baselines, and [`eval`] scores
//! every system with the equal error rate on the six dataset partitions.
//!
//! Module map:
//! - [`audio`], [`features`]: WAV I/O, resampling, spectrograms, cepstra, VAD
//! - [`archive`]: the `SVDDTNSR` tensor container for encoder and head weights
//! - [`encoder`]: transformer encoder inference
//! - [`heads`]: CNN / ResNet34 classifiers, Adam training, gradient checks
//! - [`eval`]: EER, partition reports, baseline comparison
//! - [`data`]: manifests, partition validation, codec degradation, synthetic surrogates
//! - [`pipeline`]: the command-line workflows, callable as a library

pub mod archive;
pub mod audio;
pub mod data;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod features;
pub mod heads;
pub mod pipeline;
pub mod selftest;
mod util;

pub use audio::{load_audio, Waveform};
pub use error::{Error, Result};
pub use features::{FeatureKind, FeatureMatrix};
