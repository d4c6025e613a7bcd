use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelSize {
    Tiny,
    Base,
    Small,
    Medium,
    /// Reduced instantiations for tests and desk-scale runs.
    Custom,
}

impl ModelSize {
    pub const NAMED: [ModelSize; 4] = [ModelSize::Tiny, ModelSize::Base, ModelSize::Small, ModelSize::Medium];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelSize::Tiny => "tiny",
            ModelSize::Base => "base",
            ModelSize::Small => "small",
            ModelSize::Medium => "medium",
            ModelSize::Custom => "custom",
        }
    }
}

impl std::str::FromStr for ModelSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tiny" => Ok(ModelSize::Tiny),
            "base" => Ok(ModelSize::Base),
            "small" => Ok(ModelSize::Small),
            "medium" | "med" => Ok(ModelSize::Medium),
            "custom" => Ok(ModelSize::Custom),
            _ => Err(Error::Config(format!("unknown model size `{s}`"))),
        }
    }
}

/// Encoder architecture. Widths follow the published Whisper checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub size_name: ModelSize,
    pub n_blocks: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub n_mels: usize,
    pub max_frames: usize,
}

impl EncoderConfig {
    pub fn named(size: ModelSize) -> Result<Self> {
        let (n_blocks, d_model, n_heads) = match size {
            ModelSize::Tiny => (4, 384, 6),
            ModelSize::Base => (6, 512, 8),
            ModelSize::Small => (12, 768, 12),
            ModelSize::Medium => (24, 1024, 16),
            ModelSize::Custom => {
                return Err(Error::Config("custom encoders need explicit dimensions".into()))
            }
        };
        Ok(Self {
            size_name: size,
            n_blocks,
            d_model,
            n_heads,
            d_ff: 4 * d_model,
            n_mels: 80,
            max_frames: 3000,
        })
    }

    pub fn tiny() -> Self {
        Self::named(ModelSize::Tiny).unwrap()
    }

    pub fn custom(n_blocks: usize, d_model: usize, n_heads: usize, n_mels: usize, max_frames: usize) -> Self {
        Self {
            size_name: ModelSize::Custom,
            n_blocks,
            d_model,
            n_heads,
            d_ff: 4 * d_model,
            n_mels,
            max_frames,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.d_model < 2 || self.d_model % 2 != 0 {
            return Err(Error::Config("d_model must be even".into()));
        }
        if self.n_blocks == 0 || self.d_ff == 0 || self.n_mels == 0 || self.max_frames == 0 {
            return Err(Error::Config(format!("degenerate encoder config {self:?}")));
        }
        if self.size_name != ModelSize::Custom {
            let named = Self::named(self.size_name)?;
            if named.n_blocks != self.n_blocks || named.d_model != self.d_model || named.n_heads != self.n_heads {
                return Err(Error::Config(format!(
                    "{} encoder must have {} blocks, width {}, {} heads",
                    self.size_name.as_str(),
                    named.n_blocks,
                    named.d_model,
                    named.n_heads
                )));
            }
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Output frames after the stride-2 stem: `ceil(t / 2)`.
    pub fn encoded_frames(&self, mel_frames: usize) -> usize {
        mel_frames.div_ceil(2)
    }

    /// Every weight tensor with its shape, in a fixed order.
    ///
    /// Linear weights are `[out, in]`, convolution kernels `[out, in, 3]`.
    /// The key projection has no bias (it would shift every score in a row
    /// equally and cancel in the softmax).
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let (d, f, m) = (self.d_model, self.d_ff, self.n_mels);
        let mut out = vec![
            ("conv1.weight".to_string(), vec![d, m, 3]),
            ("conv1.bias".to_string(), vec![d]),
            ("conv2.weight".to_string(), vec![d, d, 3]),
            ("conv2.bias".to_string(), vec![d]),
        ];
        for i in 0..self.n_blocks {
            let p = format!("blocks.{i}");
            let mut push = |suffix: &str, shape: Vec<usize>| out.push((format!("{p}.{suffix}"), shape));
            push("attn_ln.weight", vec![d]);
            push("attn_ln.bias", vec![d]);
            push("attn.query.weight", vec![d, d]);
            push("attn.query.bias", vec![d]);
            push("attn.key.weight", vec![d, d]);
            push("attn.value.weight", vec![d, d]);
            push("attn.value.bias", vec![d]);
            push("attn.out.weight", vec![d, d]);
            push("attn.out.bias", vec![d]);
            push("mlp_ln.weight", vec![d]);
            push("mlp_ln.bias", vec![d]);
            push("mlp.0.weight", vec![f, d]);
            push("mlp.0.bias", vec![f]);
            push("mlp.2.weight", vec![d, f]);
            push("mlp.2.bias", vec![d]);
        }
        out.push(("ln_post.weight".to_string(), vec![d]));
        out.push(("ln_post.bias".to_string(), vec![d]));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.layout().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }

    /// JSON layout manifest: architecture, tensor list and parameter total.
    pub fn layout_manifest(&self) -> LayoutManifest {
        LayoutManifest {
            config: *self,
            parameters: self.parameter_count(),
            tensors: self
                .layout()
                .into_iter()
                .map(|(name, shape)| LayoutEntry { name, shape })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutManifest {
    pub config: EncoderConfig,
    pub parameters: usize,
    pub tensors: Vec<LayoutEntry>,
}

/// The layout manifests shipped in `layouts/`.
pub fn shipped_layout(size: ModelSize) -> Option<LayoutManifest> {
    let text = match size {
        ModelSize::Tiny => include_str!("../../layouts/tiny.json"),
        ModelSize::Base => include_str!("../../layouts/base.json"),
        ModelSize::Small => include_str!("../../layouts/small.json"),
        ModelSize::Medium => include_str!("../../layouts/medium.json"),
        ModelSize::Custom => return None,
    };
    serde_json::from_str(text).ok()
}
