//! The end-to-end workflows behind the `svdd` command line: feature
//! extraction with an on-disk cache, head training, partition evaluation,
//! report assembly and spectrogram comparison.

pub mod cli;
mod commands;

use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio::Waveform;
use crate::data::Variant;
use crate::encoder::{Encoder, EncoderConfig, EncoderWeights, ModelSize};
use crate::error::{Error, Result};
use crate::features::{cqcc, encoder_input, lfcc, mfcc, CqConfig, FeatureMatrix, StftConfig};
use crate::heads::{CnnHeadConfig, HeadArch, TrainConfig};

pub use commands::{
    cmd_eval, cmd_extract, cmd_report, cmd_spectro, cmd_train, ExtractSummary, SpectroSummary, HEAD_FILE,
    REPORT_FILE,
};

/// The seven studied feature front ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SystemFeature {
    Whisper(ModelSize),
    Mfcc,
    Lfcc,
    Cqcc,
}

impl SystemFeature {
    pub const STUDIED: [SystemFeature; 7] = [
        SystemFeature::Whisper(ModelSize::Tiny),
        SystemFeature::Whisper(ModelSize::Base),
        SystemFeature::Whisper(ModelSize::Small),
        SystemFeature::Whisper(ModelSize::Medium),
        SystemFeature::Mfcc,
        SystemFeature::Lfcc,
        SystemFeature::Cqcc,
    ];
}

impl std::fmt::Display for SystemFeature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SystemFeature::Whisper(ModelSize::Tiny) => f.write_str("W-Tiny"),
            SystemFeature::Whisper(ModelSize::Base) => f.write_str("W-Base"),
            SystemFeature::Whisper(ModelSize::Small) => f.write_str("W-Small"),
            SystemFeature::Whisper(ModelSize::Medium) => f.write_str("W-Med"),
            SystemFeature::Whisper(ModelSize::Custom) => f.write_str("W-Custom"),
            SystemFeature::Mfcc => f.write_str("MFCC"),
            SystemFeature::Lfcc => f.write_str("LFCC"),
            SystemFeature::Cqcc => f.write_str("CQCC"),
        }
    }
}

impl std::str::FromStr for SystemFeature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if let Some(size) = lower.strip_prefix("w-").or_else(|| lower.strip_prefix("whisper-")) {
            return Ok(SystemFeature::Whisper(size.parse()?));
        }
        match lower.as_str() {
            "mfcc" => Ok(SystemFeature::Mfcc),
            "lfcc" => Ok(SystemFeature::Lfcc),
            "cqcc" => Ok(SystemFeature::Cqcc),
            _ => Err(Error::Config(format!(
                "unknown feature `{s}` (expected W-Tiny, W-Base, W-Small, W-Med, W-Custom, MFCC, LFCC or CQCC)"
            ))),
        }
    }
}

impl TryFrom<String> for SystemFeature {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SystemFeature> for String {
    fn from(f: SystemFeature) -> String {
        f.to_string()
    }
}

/// Cepstral front-end settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontEnd {
    pub stft: StftConfig,
    pub n_filters: usize,
    pub n_coeffs: usize,
    pub cqcc: CqConfig,
}

impl Default for FrontEnd {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            n_filters: 40,
            n_coeffs: 20,
            cqcc: CqConfig::default(),
        }
    }
}

/// One experiment: a dataset variant, a feature front end and a head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_variant")]
    pub variant: Variant,
    pub feature: SystemFeature,
    #[serde(default = "default_head")]
    pub head: HeadArch,
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    /// Encoder weight archive. A `W-Custom` feature without weights gets
    /// seeded random weights.
    #[serde(default)]
    pub weights: Option<PathBuf>,
    /// Dimensions for `W-Custom`.
    #[serde(default)]
    pub encoder: Option<EncoderConfig>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub front_end: FrontEnd,
    /// Seeds head initialization, data order and random encoder weights.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_variant() -> Variant {
    Variant::Vocals
}

fn default_head() -> HeadArch {
    HeadArch::Cnn(CnnHeadConfig::default())
}

impl ExperimentConfig {
    pub fn new(feature: SystemFeature) -> Self {
        Self {
            variant: default_variant(),
            feature,
            head: default_head(),
            manifest: None,
            weights: None,
            encoder: None,
            cache_dir: None,
            out_dir: None,
            train: TrainConfig::default(),
            front_end: FrontEnd::default(),
            seed: 0,
            workers: None,
        }
    }

    /// Reads a JSON config; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.manifest, &mut cfg.weights, &mut cfg.cache_dir, &mut cfg.out_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn manifest_path(&self) -> Result<&Path> {
        self.manifest
            .as_deref()
            .ok_or_else(|| Error::Config("no manifest given (--manifest or \"manifest\")".into()))
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out_dir
            .as_deref()
            .ok_or_else(|| Error::Config("no output directory given (--out or \"out_dir\")".into()))
    }

    pub fn cache_dir(&self) -> Result<PathBuf> {
        match &self.cache_dir {
            Some(d) => Ok(d.clone()),
            None => Ok(self.out_dir()?.join("cache")),
        }
    }

    /// Training settings with the experiment seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train }
    }

    /// `<feature>+<head>`, e.g. `W-Med+resnet34`.
    pub fn system_name(&self) -> String {
        format!("{}+{}", self.feature, self.head.tag())
    }

    pub fn validate(&self) -> Result<()> {
        for (what, p) in [("manifest", &self.manifest), ("weights", &self.weights)] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(Error::Config(format!("{what} {} does not exist", p.display())));
                }
            }
        }
        if let SystemFeature::Whisper(size) = self.feature {
            if size != ModelSize::Custom && self.weights.is_none() {
                return Err(Error::Config(format!("{} needs an encoder weight archive", self.feature)));
            }
            if size == ModelSize::Custom && self.encoder.is_none() {
                return Err(Error::Config("W-Custom needs an \"encoder\" configuration".into()));
            }
        }
        self.train_config().validate()
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

/// A ready-to-run front end for one [`SystemFeature`].
#[derive(Debug, Clone)]
pub enum Extractor {
    Whisper { encoder: Box<Encoder>, weights_id: String },
    Mfcc(FrontEnd),
    Lfcc(FrontEnd),
    Cqcc(FrontEnd),
}

impl Extractor {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(match cfg.feature {
            SystemFeature::Whisper(size) => {
                let enc_cfg = match (size, cfg.encoder) {
                    (ModelSize::Custom, Some(c)) => c,
                    (ModelSize::Custom, None) => {
                        return Err(Error::Config("W-Custom needs an \"encoder\" configuration".into()))
                    }
                    (named, _) => EncoderConfig::named(named)?,
                };
                let (weights, weights_id) = match &cfg.weights {
                    Some(path) => (crate::encoder::load_weights(path, &enc_cfg)?, sha256_file(path)?),
                    None if size == ModelSize::Custom => {
                        (EncoderWeights::random(&enc_cfg, cfg.seed)?, format!("random-seed-{}", cfg.seed))
                    }
                    None => return Err(Error::Config(format!("{} needs an encoder weight archive", cfg.feature))),
                };
                Extractor::Whisper {
                    encoder: Box::new(Encoder::new(enc_cfg, weights)?),
                    weights_id,
                }
            }
            SystemFeature::Mfcc => Extractor::Mfcc(cfg.front_end),
            SystemFeature::Lfcc => Extractor::Lfcc(cfg.front_end),
            SystemFeature::Cqcc => Extractor::Cqcc(cfg.front_end),
        })
    }

    pub fn extract(&self, w: &Waveform) -> Result<FeatureMatrix> {
        match self {
            Extractor::Whisper { encoder, .. } => {
                let mel = encoder_input(w)?;
                let rate = mel.frame_rate;
                encoder.encode(&mel)?.into_features(rate)
            }
            Extractor::Mfcc(f) => mfcc(w, &f.stft, f.n_filters, f.n_coeffs),
            Extractor::Lfcc(f) => lfcc(w, &f.stft, f.n_filters, f.n_coeffs),
            Extractor::Cqcc(f) => cqcc(w, &f.cqcc),
        }
    }

    /// Cache directory name: the feature tag plus a hash of every setting
    /// that affects its output.
    pub fn cache_key(&self, feature: SystemFeature) -> String {
        let settings = match self {
            Extractor::Whisper { encoder, weights_id } => {
                serde_json::json!({ "encoder": encoder.config, "weights": weights_id })
            }
            Extractor::Mfcc(f) => serde_json::json!({ "stft": f.stft, "n_filters": f.n_filters, "n_coeffs": f.n_coeffs }),
            Extractor::Lfcc(f) => serde_json::json!({ "stft": f.stft, "n_filters": f.n_filters, "n_coeffs": f.n_coeffs }),
            Extractor::Cqcc(f) => serde_json::json!({ "cqcc": f.cqcc }),
        };
        let digest = Sha256::digest(settings.to_string().as_bytes());
        format!("{feature}-{}", &format!("{digest:x}")[..16])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_names_round_trip() {
        for f in SystemFeature::STUDIED {
            assert_eq!(f.to_string().parse::<SystemFeature>().unwrap(), f);
        }
        assert_eq!("W-Medium".parse::<SystemFeature>().unwrap(), SystemFeature::Whisper(ModelSize::Medium));
        assert!("W-Huge".parse::<SystemFeature>().is_err());
        assert!("PLP".parse::<SystemFeature>().is_err());
    }

    #[test]
    fn config_json_and_validation() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"feature": "MFCC", "seed": 3}"#).unwrap();
        assert_eq!(cfg.feature, SystemFeature::Mfcc);
        assert_eq!(cfg.train_config().seed, 3);
        assert_eq!(cfg.system_name(), "MFCC+cnn");
        assert!(cfg.validate().is_ok());
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"feature": "W-Tiny"}"#).unwrap();
        assert!(cfg.validate().is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"feature": "MFCC", "bogus": 1}"#).is_err());
    }

    #[test]
    fn cache_keys_track_settings() {
        let a = Extractor::Mfcc(FrontEnd::default());
        let b = Extractor::Mfcc(FrontEnd { n_coeffs: 13, ..FrontEnd::default() });
        assert_ne!(a.cache_key(SystemFeature::Mfcc), b.cache_key(SystemFeature::Mfcc));
        assert_eq!(a.cache_key(SystemFeature::Mfcc), Extractor::Mfcc(FrontEnd::default()).cache_key(SystemFeature::Mfcc));
        assert!(a.cache_key(SystemFeature::Mfcc).starts_with("MFCC-"));
    }
}
