//! Dataset manifests, partition validation, codec degradation and the
//! synthetic desk-scale surrogate corpus.

pub mod codec;
mod manifest;
pub mod synth;
mod validate;

pub use codec::{build_t03, codec_augment, CodecRegistry, CodecSpec};
pub use manifest::{load_manifest, ClipRecord, Label, Manifest, Partition, Variant, MANIFEST_HEADER};
pub use validate::{
    validate_against_reference, validate_with_counts, ValidationReport, Violation, REFERENCE_COUNTS, T03_CODECS,
};
