//! Classifier architectures over a 1-channel `rows × cols` input map.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::nn::{he_normal, BatchNorm, Conv2d, Layer, Linear, MaxPool, ParamStore, ResidualBlock};

/// Two 5×5 conv + ReLU + 2×2 max-pool stages and one fully connected layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnHeadConfig {
    pub channels: [usize; 2],
    pub kernel_size: usize,
    /// Time axis of the input map; the feature axis keeps its width.
    pub input_rows: usize,
}

impl Default for CnnHeadConfig {
    fn default() -> Self {
        Self {
            channels: [16, 32],
            kernel_size: 5,
            input_rows: 256,
        }
    }
}

/// ResNet with basic blocks. The default is ResNet34.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResNetConfig {
    pub blocks_per_stage: [usize; 4],
    pub widths: [usize; 4],
    pub input_size: usize,
}

impl Default for ResNetConfig {
    fn default() -> Self {
        Self {
            blocks_per_stage: [3, 4, 6, 3],
            widths: [64, 128, 256, 512],
            input_size: 224,
        }
    }
}

impl ResNetConfig {
    /// Convolution and fully connected layers on the main path (projection
    /// shortcuts excluded): 34 for the default.
    pub fn weighted_layers(&self) -> usize {
        1 + 2 * self.blocks_per_stage.iter().sum::<usize>() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "lowercase")]
pub enum HeadArch {
    Cnn(CnnHeadConfig),
    #[serde(rename = "resnet34")]
    ResNet(ResNetConfig),
}

impl HeadArch {
    pub fn tag(&self) -> &'static str {
        match self {
            HeadArch::Cnn(_) => "cnn",
            HeadArch::ResNet(_) => "resnet34",
        }
    }

    /// Input map size for features with `feature_dim` columns.
    pub fn input_dims(&self, feature_dim: usize) -> (usize, usize) {
        match self {
            HeadArch::Cnn(c) => (c.input_rows, feature_dim),
            HeadArch::ResNet(r) => (r.input_size, r.input_size),
        }
    }

    pub fn build(&self, feature_dim: usize, rng: &mut impl Rng) -> Result<(Vec<Layer>, ParamStore)> {
        let mut store = ParamStore::default();
        let layers = match self {
            HeadArch::Cnn(c) => build_cnn(c, feature_dim, &mut store, rng)?,
            HeadArch::ResNet(r) => build_resnet(r, &mut store, rng)?,
        };
        Ok((layers, store))
    }
}

fn conv(store: &mut ParamStore, rng: &mut impl Rng, name: &str, c_in: usize, c_out: usize, kernel: usize, stride: usize, pad: usize, bias: bool) -> Layer {
    let fan_in = c_in * kernel * kernel;
    let weight = store.add(
        format!("{name}.weight"),
        vec![c_out, c_in, kernel, kernel],
        he_normal(rng, c_out * fan_in, fan_in),
        true,
    );
    let bias = bias.then(|| store.add(format!("{name}.bias"), vec![c_out], vec![0.0; c_out], true));
    Layer::Conv(Conv2d { weight, bias, c_in, c_out, kernel, stride, pad })
}

fn batch_norm(store: &mut ParamStore, name: &str, c: usize) -> Layer {
    Layer::BatchNorm(BatchNorm {
        gamma: store.add(format!("{name}.weight"), vec![c], vec![1.0; c], true),
        beta: store.add(format!("{name}.bias"), vec![c], vec![0.0; c], true),
        running_mean: store.add(format!("{name}.running_mean"), vec![c], vec![0.0; c], false),
        running_var: store.add(format!("{name}.running_var"), vec![c], vec![1.0; c], false),
    })
}

fn linear(store: &mut ParamStore, rng: &mut impl Rng, name: &str, d_in: usize, d_out: usize) -> Layer {
    // Small output layer keeps initial logits near zero.
    let w = he_normal(rng, d_in * d_out, d_in).into_iter().map(|v| v * 0.1).collect();
    Layer::Linear(Linear {
        weight: store.add(format!("{name}.weight"), vec![d_out, d_in], w, true),
        bias: store.add(format!("{name}.bias"), vec![d_out], vec![0.0; d_out], true),
        d_in,
        d_out,
    })
}

fn build_cnn(c: &CnnHeadConfig, feature_dim: usize, store: &mut ParamStore, rng: &mut impl Rng) -> Result<Vec<Layer>> {
    if c.kernel_size != 5 {
        return Err(Error::Config(format!("CNN head kernel must be 5, got {}", c.kernel_size)));
    }
    if c.input_rows < 4 || feature_dim < 4 || c.channels.contains(&0) {
        return Err(Error::Config(format!(
            "CNN head needs an input of at least 4x4 and non-zero channels (got {}x{feature_dim})",
            c.input_rows
        )));
    }
    let pad = c.kernel_size / 2;
    let pool = MaxPool { kernel: 2, stride: 2, pad: 0 };
    let (h, w) = (c.input_rows / 4, feature_dim / 4);
    Ok(vec![
        conv(store, rng, "conv1", 1, c.channels[0], c.kernel_size, 1, pad, true),
        Layer::Relu,
        Layer::MaxPool(pool.clone()),
        conv(store, rng, "conv2", c.channels[0], c.channels[1], c.kernel_size, 1, pad, true),
        Layer::Relu,
        Layer::MaxPool(pool),
        linear(store, rng, "fc", c.channels[1] * h * w, 2),
    ])
}

fn build_resnet(r: &ResNetConfig, store: &mut ParamStore, rng: &mut impl Rng) -> Result<Vec<Layer>> {
    if r.widths.contains(&0) || r.blocks_per_stage.contains(&0) || r.input_size < 8 {
        return Err(Error::Config(format!("degenerate ResNet config {r:?}")));
    }
    let mut layers = vec![
        conv(store, rng, "conv1", 1, r.widths[0], 7, 2, 3, false),
        batch_norm(store, "bn1", r.widths[0]),
        Layer::Relu,
        Layer::MaxPool(MaxPool { kernel: 3, stride: 2, pad: 1 }),
    ];
    let mut c_in = r.widths[0];
    for (stage, (&blocks, &width)) in r.blocks_per_stage.iter().zip(&r.widths).enumerate() {
        for b in 0..blocks {
            let stride = if stage > 0 && b == 0 { 2 } else { 1 };
            let p = format!("layer{}.{b}", stage + 1);
            let main = vec![
                conv(store, rng, &format!("{p}.conv1"), c_in, width, 3, stride, 1, false),
                batch_norm(store, &format!("{p}.bn1"), width),
                Layer::Relu,
                conv(store, rng, &format!("{p}.conv2"), width, width, 3, 1, 1, false),
                batch_norm(store, &format!("{p}.bn2"), width),
            ];
            let shortcut = (stride != 1 || c_in != width).then(|| {
                vec![
                    conv(store, rng, &format!("{p}.downsample.0"), c_in, width, 1, stride, 0, false),
                    batch_norm(store, &format!("{p}.downsample.1"), width),
                ]
            });
            layers.push(Layer::Residual(Box::new(ResidualBlock { main, shortcut })));
            c_in = width;
        }
    }
    layers.push(Layer::GlobalAvgPool);
    layers.push(linear(store, rng, "fc", c_in, 2));
    Ok(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn count_weighted(layers: &[Layer], main_only: bool) -> usize {
        layers
            .iter()
            .map(|l| match l {
                Layer::Conv(_) | Layer::Linear(_) => 1,
                Layer::Residual(b) => {
                    count_weighted(&b.main, main_only)
                        + if main_only { 0 } else { b.shortcut.as_ref().map_or(0, |s| count_weighted(s, false)) }
                }
                _ => 0,
            })
            .sum()
    }

    #[test]
    fn resnet34_has_34_weighted_layers() {
        let cfg = ResNetConfig::default();
        assert_eq!(cfg.weighted_layers(), 34);
        let (layers, store) = HeadArch::ResNet(cfg).build(384, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(count_weighted(&layers, true), 34);
        // Projection shortcuts only at the three stage transitions.
        assert_eq!(count_weighted(&layers, false) - 34, 3);
        // torchvision resnet34 has 21,797,672 weights with a 3-channel stem and
        // 1000 classes; with 1 input channel and 2 classes that becomes:
        let expected = 21_797_672 - 64 * 2 * 49 - (512 * 1000 + 1000) + (512 * 2 + 2);
        assert_eq!(store.trainable_count(), expected);
    }

    #[test]
    fn cnn_shapes() {
        let arch = HeadArch::Cnn(CnnHeadConfig::default());
        let (layers, store) = arch.build(384, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(layers.len(), 7);
        let fc = store.index_of("fc.weight").unwrap();
        assert_eq!(store.params[fc].shape, vec![2, 32 * 64 * 96]);
        assert!(HeadArch::Cnn(CnnHeadConfig { kernel_size: 3, ..Default::default() })
            .build(384, &mut ChaCha8Rng::seed_from_u64(0))
            .is_err());
    }

    #[test]
    fn arch_json_tags() {
        let j = serde_json::to_string(&HeadArch::Cnn(CnnHeadConfig::default())).unwrap();
        assert!(j.starts_with(r#"{"arch":"cnn""#), "{j}");
        let back: HeadArch = serde_json::from_str(&j).unwrap();
        assert_eq!(back.tag(), "cnn");
    }
}
