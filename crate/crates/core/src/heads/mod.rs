//! Classifier heads over feature matrices: a two-layer CNN and ResNet34,
//! their training loop and a finite-difference gradient check.
//!
//! A feature matrix enters a head as a single-channel image (time down the
//! rows, coefficients across the columns), bilinearly resized to the head's
//! fixed input size and standardized with statistics from the training set.

mod adam;
mod arch;
mod gradcheck;
pub mod nn;
mod train;

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::archive::{Tensor, TensorArchive};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub use adam::{Adam, AdamConfig};
pub use arch::{CnnHeadConfig, HeadArch, ResNetConfig};
pub use gradcheck::{grad_check, GradCheckReport};
pub use train::{train, EpochRecord, TrainConfig, TrainedHead};

use nn::{forward_all, Layer, ParamStore, Tensor4};

const INPUT_MEAN: &str = "input.mean";
const INPUT_STD: &str = "input.std";

/// Resizes a row-major `h × w` map to `out_h × out_w` with half-pixel
/// aligned bilinear interpolation (edges clamped).
pub fn bilinear_resize(src: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    if (h, w) == (out_h, out_w) {
        return src.to_vec();
    }
    let axis = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f64)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|o| {
                let pos = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
                let i0 = pos.floor() as usize;
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, pos - i0 as f64)
            })
            .collect()
    };
    let rows = axis(h, out_h);
    let cols = axis(w, out_w);
    let mut out = Vec::with_capacity(out_h * out_w);
    for &(r0, r1, fr) in &rows {
        for &(c0, c1, fc) in &cols {
            let top = src[r0 * w + c0] * (1.0 - fc) + src[r0 * w + c1] * fc;
            let bottom = src[r1 * w + c0] * (1.0 - fc) + src[r1 * w + c1] * fc;
            out.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    out
}

/// Softmax probability of the bonafide class (logit index 0).
pub fn score_from_logits(logits: [f64; 2]) -> f64 {
    let d = logits[1] - logits[0];
    // 1 / (1 + e^(l1 - l0)), stable for either sign.
    if d >= 0.0 {
        let e = (-d).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + d.exp())
    }
}

/// An instantiated classifier: architecture, layers and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub arch: HeadArch,
    pub feature_dim: usize,
    pub layers: Vec<Layer>,
    pub store: ParamStore,
}

impl Head {
    pub fn new(arch: HeadArch, feature_dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (layers, mut store) = arch.build(feature_dim, &mut rng)?;
        store.add(INPUT_MEAN, vec![1], vec![0.0], false);
        store.add(INPUT_STD, vec![1], vec![1.0], false);
        Ok(Self {
            arch,
            feature_dim,
            layers,
            store,
        })
    }

    pub fn input_dims(&self) -> (usize, usize) {
        self.arch.input_dims(self.feature_dim)
    }

    fn buffer(&self, name: &str) -> f64 {
        self.store.params[self.store.index_of(name).expect("input buffers are always present")].value[0]
    }

    pub(crate) fn set_input_stats(&mut self, mean: f64, std: f64) {
        let i = self.store.index_of(INPUT_MEAN).unwrap();
        self.store.params[i].value[0] = mean;
        let i = self.store.index_of(INPUT_STD).unwrap();
        self.store.params[i].value[0] = std;
    }

    /// Resized, unstandardized input map.
    pub fn resize_input(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.cols() != self.feature_dim {
            return Err(Error::Shape(format!(
                "head expects {}-dimensional features, got {}",
                self.feature_dim,
                x.cols()
            )));
        }
        let src: Vec<f64> = x.values().iter().map(|&v| v as f64).collect();
        let (h, w) = self.input_dims();
        Ok(bilinear_resize(&src, x.rows(), x.cols(), h, w))
    }

    /// Resized and standardized input map, ready for [`Head::logits`].
    pub fn prepare(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        let mut v = self.resize_input(x)?;
        self.standardize(&mut v);
        Ok(v)
    }

    pub(crate) fn standardize(&self, v: &mut [f64]) {
        let (mean, std) = (self.buffer(INPUT_MEAN), self.buffer(INPUT_STD));
        v.iter_mut().for_each(|x| *x = (*x - mean) / std);
    }

    pub(crate) fn batch(&self, inputs: &[&[f64]]) -> Result<Tensor4> {
        let (h, w) = self.input_dims();
        let mut data = Vec::with_capacity(inputs.len() * h * w);
        for x in inputs {
            if x.len() != h * w {
                return Err(Error::Shape(format!("prepared input has {} values, expected {}", x.len(), h * w)));
            }
            data.extend_from_slice(x);
        }
        Tensor4::new(inputs.len(), 1, h, w, data)
    }

    /// Inference-mode logits for prepared inputs.
    pub fn logits(&self, inputs: &[&[f64]]) -> Result<Vec<[f64; 2]>> {
        let (y, _) = forward_all(&self.layers, &self.store, self.batch(inputs)?, false)?;
        let out: Vec<[f64; 2]> = y.data.chunks(2).map(|c| [c[0], c[1]]).collect();
        if out.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("head logits".into()));
        }
        Ok(out)
    }

    pub fn head_forward(&self, x: &FeatureMatrix) -> Result<[f64; 2]> {
        let p = self.prepare(x)?;
        Ok(self.logits(&[&p])?[0])
    }

    /// Probability that `x` is bonafide.
    pub fn score(&self, x: &FeatureMatrix) -> Result<f64> {
        Ok(score_from_logits(self.head_forward(x)?))
    }

    pub fn to_archive(&self) -> Result<TensorArchive> {
        let mut a = TensorArchive::new();
        for p in &self.store.params {
            a.insert(p.name.clone(), Tensor::new(p.shape.clone(), p.value.iter().map(|&v| v as f32).collect())?);
        }
        Ok(a)
    }

    /// Rebuilds the head for `arch` and fills it from `archive`.
    pub fn from_archive(arch: HeadArch, feature_dim: usize, archive: &TensorArchive) -> Result<Self> {
        let mut head = Head::new(arch, feature_dim, 0)?;
        for p in &mut head.store.params {
            let t = archive.expect(&p.name, &p.shape)?;
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("head tensor `{}`", p.name)));
            }
            p.value = t.data.iter().map(|&v| v as f64).collect();
        }
        Ok(head)
    }
}

/// `<path>.json` next to a head archive.
pub fn sidecar_path(archive_path: &Path) -> PathBuf {
    let mut s = archive_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Sidecar {
    pub arch: HeadArch,
    pub feature_dim: usize,
    pub train_config: TrainConfig,
    pub history: Vec<EpochRecord>,
    pub initial_train_loss: f64,
    pub best_epoch: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resize_identity_and_constant() {
        let src: Vec<f64> = (0..12).map(|v| v as f64).collect();
        assert_eq!(bilinear_resize(&src, 3, 4, 3, 4), src);
        let out = bilinear_resize(&[2.5; 6], 2, 3, 7, 5);
        assert!(out.iter().all(|&v| (v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn resize_upsamples_linearly() {
        // 1 x 2 -> 1 x 4: half-pixel centers at 0.25, 0.75, 1.25, 1.75 of
        // the input grid, i.e. positions -0.25, 0.25, 0.75, 1.25 (clamped).
        let out = bilinear_resize(&[0.0, 4.0], 1, 2, 1, 4);
        assert_eq!(out, vec![0.0, 1.0, 3.0, 4.0]);
    }

    #[test]
    fn scores() {
        assert_eq!(score_from_logits([0.0, 0.0]), 0.5);
        assert!((score_from_logits([1.0, -1.0]) - 0.880_797_077_977_882_4).abs() < 1e-12);
        assert!((score_from_logits([-1.0, 1.0]) - 0.119_202_922_022_117_6).abs() < 1e-12);
        assert!(score_from_logits([800.0, -800.0]) > 1.0 - 1e-6);
        assert!(score_from_logits([-800.0, 800.0]) >= 0.0);
    }

    #[test]
    fn archive_round_trip() {
        let arch = HeadArch::Cnn(CnnHeadConfig { channels: [2, 3], kernel_size: 5, input_rows: 8 });
        let head = Head::new(arch.clone(), 8, 3).unwrap();
        let a = TensorArchive::from_bytes(&head.to_archive().unwrap().to_bytes().unwrap()).unwrap();
        let back = Head::from_archive(arch, 8, &a).unwrap();
        for (p, q) in head.store.params.iter().zip(&back.store.params) {
            assert_eq!(p.name, q.name);
            for (a, b) in p.value.iter().zip(&q.value) {
                assert_eq!(*a as f32, *b as f32);
            }
        }
    }
}
