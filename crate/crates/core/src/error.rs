use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unreadable audio file {path}: {reason}")]
    Audio { path: PathBuf, reason: String },

    #[error("unsupported audio encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("audio is empty")]
    EmptyAudio,

    #[error("waveform has {len} samples, shorter than one analysis window of {window}")]
    TooShort { len: usize, window: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("tensor archive: {0}")]
    Archive(String),

    #[error("missing tensor `{0}`")]
    MissingTensor(String),

    #[error("tensor `{name}` has shape {found:?}, expected {expected:?}")]
    TensorShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("checksum mismatch in `{name}`: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum {
        name: String,
        stored: u32,
        computed: u32,
    },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("EER needs both classes: {bonafide} bonafide, {deepfake} deepfake trials")]
    SingleClass { bonafide: usize, deepfake: usize },

    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },

    #[error("no features for clip `{0}`")]
    MissingFeature(String),

    #[error("codec `{codec}` unavailable: {reason}")]
    CodecUnavailable { codec: String, reason: String },

    #[error("feature file {path}: {reason}")]
    FeatureFile { path: PathBuf, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
