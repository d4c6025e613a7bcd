//! Whisper-style transformer encoder.
//!
//! `mel (T × n_mels) → conv1 (k3, s1) + GELU → conv2 (k3, s2) + GELU
//! → + sinusoidal positions → pre-norm blocks → final LayerNorm`.
//!
//! Each block computes `x + MHSA(LN(x))` followed by `x + MLP(LN(x))` with a
//! `d_model → 4·d_model → d_model` GELU MLP.

mod config;
pub mod ops;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::archive::{Tensor, TensorArchive};
use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureMatrix};

pub use config::{shipped_layout, EncoderConfig, LayoutEntry, LayoutManifest, ModelSize};
pub use ops::{
    attention_weights, conv1d, gelu, layer_norm, linear, scaled_dot_attention, sinusoidal_positions,
    AttentionParams, Matrix,
};

/// Weights of one transformer block. Linear weights are `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights {
    pub attn_ln_gain: Vec<f32>,
    pub attn_ln_bias: Vec<f32>,
    pub query: Matrix,
    pub query_bias: Vec<f32>,
    pub key: Matrix,
    pub value: Matrix,
    pub value_bias: Vec<f32>,
    pub out: Matrix,
    pub out_bias: Vec<f32>,
    pub mlp_ln_gain: Vec<f32>,
    pub mlp_ln_bias: Vec<f32>,
    pub fc1: Matrix,
    pub fc1_bias: Vec<f32>,
    pub fc2: Matrix,
    pub fc2_bias: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderWeights {
    pub conv1: Vec<f32>,
    pub conv1_bias: Vec<f32>,
    pub conv2: Vec<f32>,
    pub conv2_bias: Vec<f32>,
    pub blocks: Vec<BlockWeights>,
    pub ln_post_gain: Vec<f32>,
    pub ln_post_bias: Vec<f32>,
}

fn matrix_from(t: &Tensor) -> Matrix {
    Matrix {
        rows: t.shape[0],
        cols: t.shape[1..].iter().product(),
        data: t.data.clone(),
    }
}

impl EncoderWeights {
    /// Validates that `archive` holds exactly the layout for `cfg` with
    /// finite values, and unpacks it.
    pub fn from_archive(archive: &TensorArchive, cfg: &EncoderConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = cfg.layout();
        for (name, shape) in &layout {
            let t = archive.expect(name, shape)?;
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("tensor `{name}`")));
            }
        }
        if let Some(extra) = archive
            .tensors
            .keys()
            .find(|k| !layout.iter().any(|(n, _)| n == *k))
        {
            return Err(Error::Archive(format!(
                "unexpected tensor `{extra}` for a {} encoder",
                cfg.size_name.as_str()
            )));
        }
        let vec = |name: &str| archive.get(name).map(|t| t.data.clone());
        let mat = |name: &str| archive.get(name).map(matrix_from);
        let mut blocks = Vec::with_capacity(cfg.n_blocks);
        for i in 0..cfg.n_blocks {
            let p = |s: &str| format!("blocks.{i}.{s}");
            blocks.push(BlockWeights {
                attn_ln_gain: vec(&p("attn_ln.weight"))?,
                attn_ln_bias: vec(&p("attn_ln.bias"))?,
                query: mat(&p("attn.query.weight"))?,
                query_bias: vec(&p("attn.query.bias"))?,
                key: mat(&p("attn.key.weight"))?,
                value: mat(&p("attn.value.weight"))?,
                value_bias: vec(&p("attn.value.bias"))?,
                out: mat(&p("attn.out.weight"))?,
                out_bias: vec(&p("attn.out.bias"))?,
                mlp_ln_gain: vec(&p("mlp_ln.weight"))?,
                mlp_ln_bias: vec(&p("mlp_ln.bias"))?,
                fc1: mat(&p("mlp.0.weight"))?,
                fc1_bias: vec(&p("mlp.0.bias"))?,
                fc2: mat(&p("mlp.2.weight"))?,
                fc2_bias: vec(&p("mlp.2.bias"))?,
            });
        }
        Ok(Self {
            conv1: vec("conv1.weight")?,
            conv1_bias: vec("conv1.bias")?,
            conv2: vec("conv2.weight")?,
            conv2_bias: vec("conv2.bias")?,
            blocks,
            ln_post_gain: vec("ln_post.weight")?,
            ln_post_bias: vec("ln_post.bias")?,
        })
    }

    pub fn to_archive(&self, cfg: &EncoderConfig) -> Result<TensorArchive> {
        let mut flat: Vec<Vec<f32>> = vec![
            self.conv1.clone(),
            self.conv1_bias.clone(),
            self.conv2.clone(),
            self.conv2_bias.clone(),
        ];
        for b in &self.blocks {
            flat.extend([
                b.attn_ln_gain.clone(),
                b.attn_ln_bias.clone(),
                b.query.data.clone(),
                b.query_bias.clone(),
                b.key.data.clone(),
                b.value.data.clone(),
                b.value_bias.clone(),
                b.out.data.clone(),
                b.out_bias.clone(),
                b.mlp_ln_gain.clone(),
                b.mlp_ln_bias.clone(),
                b.fc1.data.clone(),
                b.fc1_bias.clone(),
                b.fc2.data.clone(),
                b.fc2_bias.clone(),
            ]);
        }
        flat.push(self.ln_post_gain.clone());
        flat.push(self.ln_post_bias.clone());
        let layout = cfg.layout();
        if layout.len() != flat.len() {
            return Err(Error::Shape(format!(
                "{} tensors for a {}-tensor layout",
                flat.len(),
                layout.len()
            )));
        }
        let mut a = TensorArchive::new();
        for ((name, shape), data) in layout.into_iter().zip(flat) {
            a.insert(name, Tensor::new(shape, data)?);
        }
        Ok(a)
    }

    /// Seeded random weights: uniform `±1/√fan_in` for projections, gains
    /// near 1 and small biases.
    pub fn random(cfg: &EncoderConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut archive = TensorArchive::new();
        for (name, shape) in cfg.layout() {
            let n: usize = shape.iter().product();
            let data: Vec<f32> = if name.ends_with("ln.weight") || name.ends_with("ln_post.weight") {
                (0..n).map(|_| 1.0 + rng.gen_range(-0.1..0.1)).collect()
            } else if shape.len() == 1 {
                (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect()
            } else {
                let fan_in: usize = shape[1..].iter().product();
                let a = 1.0 / (fan_in as f32).sqrt();
                (0..n).map(|_| rng.gen_range(-a..a)).collect()
            };
            archive.insert(name, Tensor::new(shape, data)?);
        }
        Self::from_archive(&archive, cfg)
    }
}

/// Loads and validates encoder weights from a tensor archive file.
pub fn load_weights(path: impl AsRef<Path>, cfg: &EncoderConfig) -> Result<EncoderWeights> {
    EncoderWeights::from_archive(&TensorArchive::load(path)?, cfg)
}

/// Multi-head self-attention with the block's projections.
pub fn multi_head_self_attention(x: &Matrix, w: &BlockWeights, n_heads: usize) -> Result<Matrix> {
    let d = x.cols;
    if n_heads == 0 || d % n_heads != 0 {
        return Err(Error::Shape(format!("width {d} not divisible into {n_heads} heads")));
    }
    let q = linear(x, &w.query, Some(&w.query_bias))?;
    let k = linear(x, &w.key, None)?;
    let v = linear(x, &w.value, Some(&w.value_bias))?;
    let dh = d / n_heads;
    let mut concat = Matrix::zeros(x.rows, d);
    for h in 0..n_heads {
        let p = AttentionParams::new(q.columns(h * dh, dh), k.columns(h * dh, dh), v.columns(h * dh, dh))?;
        let o = scaled_dot_attention(&p)?;
        for r in 0..x.rows {
            concat.row_mut(r)[h * dh..(h + 1) * dh].copy_from_slice(o.row(r));
        }
    }
    linear(&concat, &w.out, Some(&w.out_bias))
}

/// One pre-norm encoder block.
pub fn transformer_block(x: &Matrix, w: &BlockWeights, n_heads: usize) -> Result<Matrix> {
    let mut h = x.clone();
    let a = multi_head_self_attention(&layer_norm(&h, &w.attn_ln_gain, &w.attn_ln_bias), w, n_heads)?;
    h.add_assign(&a)?;
    let mut m = linear(&layer_norm(&h, &w.mlp_ln_gain, &w.mlp_ln_bias), &w.fc1, Some(&w.fc1_bias))?;
    ops::gelu_inplace(&mut m);
    let m = linear(&m, &w.fc2, Some(&w.fc2_bias))?;
    h.add_assign(&m)?;
    if !h.is_finite() {
        return Err(Error::NonFinite("transformer block output (corrupted weights?)".into()));
    }
    Ok(h)
}

/// Two GELU convolutions; the second has stride 2.
pub fn conv_stem(mel: &Matrix, w: &EncoderWeights, cfg: &EncoderConfig) -> Result<Matrix> {
    if mel.cols != cfg.n_mels {
        return Err(Error::Shape(format!(
            "mel has {} bins, encoder expects {}",
            mel.cols, cfg.n_mels
        )));
    }
    let mut h = conv1d(mel, &w.conv1, &w.conv1_bias, cfg.d_model, 3, 1, 1)?;
    ops::gelu_inplace(&mut h);
    let mut h = conv1d(&h, &w.conv2, &w.conv2_bias, cfg.d_model, 3, 2, 1)?;
    ops::gelu_inplace(&mut h);
    Ok(h)
}

/// Last hidden state of the encoder for one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub values: Matrix,
    pub source_clip: String,
    pub model_size: ModelSize,
}

impl Encoding {
    pub fn into_features(self, mel_frame_rate: f64) -> Result<FeatureMatrix> {
        let (rows, cols) = (self.values.rows, self.values.cols);
        Ok(FeatureMatrix::new(self.values.data, rows, cols, mel_frame_rate / 2.0, FeatureKind::Encoding)?
            .with_clip(self.source_clip))
    }
}

/// A configured encoder with immutable, validated weights.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub weights: EncoderWeights,
}

impl Encoder {
    pub fn new(config: EncoderConfig, weights: EncoderWeights) -> Result<Self> {
        config.validate()?;
        if weights.blocks.len() != config.n_blocks {
            return Err(Error::Config(format!(
                "{} weight blocks for a {}-block encoder",
                weights.blocks.len(),
                config.n_blocks
            )));
        }
        Ok(Self { config, weights })
    }

    pub fn load(path: impl AsRef<Path>, config: EncoderConfig) -> Result<Self> {
        let weights = load_weights(path, &config)?;
        Self::new(config, weights)
    }

    /// Pads (with the clip's minimum value, i.e. its silence floor) or trims
    /// the mel to `max_frames` rows.
    pub fn fit_frames(&self, mel: &FeatureMatrix) -> Matrix {
        let t = self.config.max_frames;
        let d = mel.cols();
        let floor = mel.values().iter().cloned().fold(f32::INFINITY, f32::min);
        let mut data = Vec::with_capacity(t * d);
        data.extend_from_slice(&mel.values()[..mel.rows().min(t) * d]);
        data.resize(t * d, floor);
        Matrix { rows: t, cols: d, data }
    }

    pub fn encode(&self, mel: &FeatureMatrix) -> Result<Encoding> {
        if mel.kind != FeatureKind::LogMel {
            return Err(Error::Config(format!("encoder input must be LogMel, got {}", mel.kind)));
        }
        if mel.cols() != self.config.n_mels {
            return Err(Error::Shape(format!(
                "mel has {} bins, encoder expects {}",
                mel.cols(),
                self.config.n_mels
            )));
        }
        let values = self.encode_matrix(&self.fit_frames(mel))?;
        Ok(Encoding {
            values,
            source_clip: mel.source_clip.clone(),
            model_size: self.config.size_name,
        })
    }

    /// Runs the network on an already fitted `T × n_mels` matrix.
    pub fn encode_matrix(&self, mel: &Matrix) -> Result<Matrix> {
        let mut h = conv_stem(mel, &self.weights, &self.config)?;
        h.add_assign(&sinusoidal_positions(h.rows, self.config.d_model)?)?;
        for block in &self.weights.blocks {
            h = transformer_block(&h, block, self.config.n_heads)?;
        }
        let out = layer_norm(&h, &self.weights.ln_post_gain, &self.weights.ln_post_bias);
        if !out.is_finite() {
            return Err(Error::NonFinite("encoder output".into()));
        }
        Ok(out)
    }

    /// Encodes clips independently in parallel; order is preserved.
    pub fn encode_batch(&self, mels: &[FeatureMatrix]) -> Vec<Result<Encoding>> {
        mels.par_iter().map(|m| self.encode(m)).collect()
    }
}
