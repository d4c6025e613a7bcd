//! Clip manifests.
//!
//! CSV with header `clip_id,path,label,singer_id,language,partition,variant,codec`;
//! `codec` is empty for uncoded clips.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Bonafide,
    Deepfake,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Bonafide => "bonafide",
            Label::Deepfake => "deepfake",
        }
    }

    /// Class index used by the classifier heads.
    pub fn class_index(self) -> usize {
        match self {
            Label::Bonafide => 0,
            Label::Deepfake => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Partition {
    Train,
    Val,
    T01,
    T02,
    T03,
    T04,
}

impl Partition {
    pub const ALL: [Partition; 6] = [
        Partition::Train,
        Partition::Val,
        Partition::T01,
        Partition::T02,
        Partition::T03,
        Partition::T04,
    ];
    pub const TESTS: [Partition; 4] = [Partition::T01, Partition::T02, Partition::T03, Partition::T04];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "Train",
            Partition::Val => "Val",
            Partition::T01 => "T01",
            Partition::T02 => "T02",
            Partition::T03 => "T03",
            Partition::T04 => "T04",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Partition::Train => "general training set",
            Partition::Val => "general validation set",
            Partition::T01 => "seen singers, unseen songs",
            Partition::T02 => "unseen singers, unseen songs",
            Partition::T03 => "T02 through four communication codecs",
            Partition::T04 => "unseen languages and musical contexts",
        }
    }
}

impl std::str::FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Partition::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown partition tag `{s}`")))
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Vocals,
    Mixture,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub clip_id: String,
    pub path: PathBuf,
    pub label: Label,
    pub singer_id: String,
    pub language: String,
    pub partition: Partition,
    pub variant: Variant,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub codec: Option<String>,
}

fn empty_as_none<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<String>, D::Error> {
    let s: Option<String> = Option::deserialize(d)?;
    Ok(s.filter(|s| !s.is_empty()))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub records: Vec<ClipRecord>,
}

pub const MANIFEST_HEADER: &str = "clip_id,path,label,singer_id,language,partition,variant,codec";

impl Manifest {
    pub fn new(records: Vec<ClipRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            if !seen.insert(r.clip_id.as_str()) {
                return Err(Error::Manifest {
                    line: i + 2,
                    reason: format!("duplicate clip_id `{}`", r.clip_id),
                });
            }
        }
        Ok(Self { records })
    }

    pub fn partition(&self, p: Partition) -> impl Iterator<Item = &ClipRecord> {
        self.records.iter().filter(move |r| r.partition == p)
    }

    pub fn count(&self, p: Partition, label: Label) -> usize {
        self.partition(p).filter(|r| r.label == label).count()
    }

    /// Parses a manifest; relative audio paths resolve against `base`.
    pub fn from_reader(reader: impl std::io::Read, base: Option<&Path>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().collect::<Vec<_>>().join(",") != MANIFEST_HEADER {
            return Err(Error::Manifest {
                line: 1,
                reason: format!("header must be `{MANIFEST_HEADER}`"),
            });
        }
        let mut records = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| Error::Manifest { line, reason: e.to_string() })?;
            // Partition tags get their own message; everything else goes through serde.
            if let Some(tag) = row.get(5) {
                tag.parse::<Partition>().map_err(|_| Error::Manifest {
                    line,
                    reason: format!("unknown partition tag `{tag}`"),
                })?;
            }
            let mut rec: ClipRecord = row
                .deserialize(Some(&header))
                .map_err(|e| Error::Manifest { line, reason: e.to_string() })?;
            if rec.clip_id.is_empty() {
                return Err(Error::Manifest { line, reason: "empty clip_id".into() });
            }
            if let (Some(base), true) = (base, rec.path.is_relative()) {
                rec.path = base.join(&rec.path);
            }
            records.push(rec);
        }
        Self::new(records)
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(MANIFEST_HEADER.split(','))?;
        for r in &self.records {
            w.write_record([
                r.clip_id.as_str(),
                &r.path.to_string_lossy(),
                r.label.as_str(),
                &r.singer_id,
                &r.language,
                r.partition.as_str(),
                match r.variant {
                    Variant::Vocals => "vocals",
                    Variant::Mixture => "mixture",
                },
                r.codec.as_deref().unwrap_or(""),
            ])?;
        }
        w.into_inner().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::util::write_atomic(path.as_ref(), &self.to_csv_bytes()?)
    }

    /// Records whose audio file does not exist.
    pub fn missing_audio(&self) -> Vec<&ClipRecord> {
        self.records.iter().filter(|r| !r.path.exists()).collect()
    }
}

/// Loads a manifest; relative audio paths resolve against the manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Manifest::from_reader(file, path.parent())
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "clip_id,path,label,singer_id,language,partition,variant,codec\n\
        a,audio/a.wav,bonafide,s1,en,Train,vocals,\n\
        b,/abs/b.wav,deepfake,s2,zh,T03,mixture,g711u\n";

    #[test]
    fn parses_and_resolves_paths() {
        let m = Manifest::from_reader(GOOD.as_bytes(), Some(Path::new("/data"))).unwrap();
        assert_eq!(m.records.len(), 2);
        assert_eq!(m.records[0].path, PathBuf::from("/data/audio/a.wav"));
        assert_eq!(m.records[0].codec, None);
        assert_eq!(m.records[1].codec.as_deref(), Some("g711u"));
        assert_eq!(m.records[1].partition, Partition::T03);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let text = format!("{GOOD}a,x.wav,bonafide,s1,en,Val,vocals,\n");
        match Manifest::from_reader(text.as_bytes(), None) {
            Err(Error::Manifest { line, reason }) => {
                assert_eq!(line, 4);
                assert!(reason.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_partition_reports_line() {
        let text = format!("{GOOD}c,x.wav,bonafide,s1,en,T05,vocals,\n");
        match Manifest::from_reader(text.as_bytes(), None) {
            Err(Error::Manifest { line, reason }) => {
                assert_eq!(line, 4);
                assert!(reason.contains("T05"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_rows_report_line() {
        let text = format!("{GOOD}c,x.wav,maybe,s1,en,Val,vocals,\n");
        assert!(matches!(
            Manifest::from_reader(text.as_bytes(), None),
            Err(Error::Manifest { line: 4, .. })
        ));
        assert!(matches!(
            Manifest::from_reader("id,path\n".as_bytes(), None),
            Err(Error::Manifest { line: 1, .. })
        ));
    }
}
