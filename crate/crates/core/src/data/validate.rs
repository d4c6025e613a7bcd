//! Partition-count and singer-overlap checks against the reference split.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::manifest::{Label, Manifest, Partition};

/// Reference (bonafide, deepfake) clip counts per partition.
pub const REFERENCE_COUNTS: [(Partition, usize, usize); 6] = [
    (Partition::Train, 5251, 4519),
    (Partition::Val, 1089, 543),
    (Partition::T01, 370, 1208),
    (Partition::T02, 1685, 1006),
    (Partition::T03, 6740, 4024),
    (Partition::T04, 353, 166),
];

/// Number of codecs T03 applies to every T02 clip.
pub const T03_CODECS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Count {
        partition: Partition,
        expected_bonafide: usize,
        expected_deepfake: usize,
        found_bonafide: usize,
        found_deepfake: usize,
    },
    /// T03 must hold exactly four coded copies of every T02 clip.
    CodecMultiple {
        label: Label,
        t02: usize,
        t03: usize,
    },
    /// A T01 singer that never appears in Train.
    SeenSinger { singer: String },
    /// A T02 singer that also appears in Train.
    UnseenSinger { singer: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Count {
                partition,
                expected_bonafide,
                expected_deepfake,
                found_bonafide,
                found_deepfake,
            } => write!(
                f,
                "{partition}: expected {expected_bonafide}/{expected_deepfake} bonafide/deepfake, found {found_bonafide}/{found_deepfake}"
            ),
            Violation::CodecMultiple { label, t02, t03 } => write!(
                f,
                "T03 {} clips: {t03} is not {T03_CODECS} x {t02} (T02)",
                label.as_str()
            ),
            Violation::SeenSinger { singer } => {
                write!(f, "seen-singer violation: T01 singer `{singer}` is absent from Train")
            }
            Violation::UnseenSinger { singer } => {
                write!(f, "unseen-singer violation: T02 singer `{singer}` also appears in Train")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn singers(m: &Manifest, p: Partition) -> BTreeSet<&str> {
    m.partition(p).map(|r| r.singer_id.as_str()).collect()
}

/// Checks counts against [`REFERENCE_COUNTS`] and the singer-overlap
/// structure of the test conditions.
pub fn validate_against_reference(m: &Manifest) -> ValidationReport {
    validate_with_counts(m, &REFERENCE_COUNTS)
}

/// As [`validate_against_reference`], with caller-supplied counts (used for
/// scaled-down surrogate datasets).
pub fn validate_with_counts(m: &Manifest, counts: &[(Partition, usize, usize)]) -> ValidationReport {
    let mut violations = Vec::new();
    for &(partition, bona, fake) in counts {
        let (fb, ff) = (m.count(partition, Label::Bonafide), m.count(partition, Label::Deepfake));
        if (fb, ff) != (bona, fake) {
            violations.push(Violation::Count {
                partition,
                expected_bonafide: bona,
                expected_deepfake: fake,
                found_bonafide: fb,
                found_deepfake: ff,
            });
        }
    }
    for label in [Label::Bonafide, Label::Deepfake] {
        let (t02, t03) = (m.count(Partition::T02, label), m.count(Partition::T03, label));
        if t03 != T03_CODECS * t02 {
            violations.push(Violation::CodecMultiple { label, t02, t03 });
        }
    }
    let train = singers(m, Partition::Train);
    for s in singers(m, Partition::T01) {
        if !train.contains(s) {
            violations.push(Violation::SeenSinger { singer: s.to_string() });
        }
    }
    for s in singers(m, Partition::T02) {
        if train.contains(s) {
            violations.push(Violation::UnseenSinger { singer: s.to_string() });
        }
    }
    ValidationReport { violations }
}
