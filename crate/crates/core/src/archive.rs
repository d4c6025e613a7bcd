//! Portable tensor archive, version 1.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"SVDDTNSR" | u32 version | u32 header_len | header JSON | blob | u32 crc32(blob)
//! ```
//!
//! The header maps each tensor name to
//! `{"dtype":"f32","shape":[..],"offset":o,"byte_length":n,"crc32":c}` where
//! `offset` is relative to the start of the blob and `crc32` covers the
//! tensor's own bytes. Tensors are stored row-major in name order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SVDDTNSR";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub dtype: String,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub byte_length: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crc32: Option<u32>,
}

/// Named tensors, kept sorted by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorArchive {
    pub tensors: BTreeMap<String, Tensor>,
}

impl TensorArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    /// Fetches `name` and checks its shape.
    pub fn expect(&self, name: &str, shape: &[usize]) -> Result<&Tensor> {
        let t = self.get(name)?;
        if t.shape != shape {
            return Err(Error::TensorShape {
                name: name.to_string(),
                expected: shape.to_vec(),
                found: t.shape.clone(),
            });
        }
        Ok(t)
    }

    pub fn total_parameters(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut header = BTreeMap::new();
        let mut blob = Vec::with_capacity(self.total_parameters() * 4);
        for (name, t) in &self.tensors {
            let start = blob.len();
            for v in &t.data {
                blob.extend_from_slice(&v.to_le_bytes());
            }
            header.insert(
                name.clone(),
                TensorEntry {
                    dtype: "f32".into(),
                    shape: t.shape.clone(),
                    offset: start as u64,
                    byte_length: (blob.len() - start) as u64,
                    crc32: Some(crc32fast::hash(&blob[start..])),
                },
            );
        }
        let header = serde_json::to_vec(&header)?;
        let header_len = u32::try_from(header.len())
            .map_err(|_| Error::Archive("header exceeds 4 GiB".into()))?;
        let mut out = Vec::with_capacity(16 + header.len() + blob.len() + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&header_len.to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&blob);
        out.extend_from_slice(&crc32fast::hash(&blob).to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let err = |m: &str| Error::Archive(m.to_string());
        if bytes.len() < 20 {
            return Err(err("file too short"));
        }
        if &bytes[..8] != MAGIC {
            return Err(err("bad magic (expected SVDDTNSR)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Archive(format!("unsupported version {version}")));
        }
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let blob_start = 16 + header_len;
        if bytes.len() < blob_start + 4 {
            return Err(err("truncated header"));
        }
        let header: BTreeMap<String, TensorEntry> = serde_json::from_slice(&bytes[16..blob_start])?;
        let blob = &bytes[blob_start..bytes.len() - 4];
        let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        let computed = crc32fast::hash(blob);

        let mut tensors = BTreeMap::new();
        let blob_ok = stored == computed;
        for (name, entry) in header {
            if entry.dtype != "f32" {
                return Err(Error::Archive(format!(
                    "tensor `{name}` has dtype {}, only f32 is supported",
                    entry.dtype
                )));
            }
            let n: usize = entry.shape.iter().product();
            let (start, len) = (entry.offset as usize, entry.byte_length as usize);
            if len != n * 4 || start.checked_add(len).map_or(true, |end| end > blob.len()) {
                return Err(Error::Archive(format!(
                    "tensor `{name}` range {start}+{len} does not fit its shape or the blob"
                )));
            }
            let raw = &blob[start..start + len];
            if let Some(crc) = entry.crc32 {
                let c = crc32fast::hash(raw);
                if c != crc {
                    return Err(Error::Checksum {
                        name,
                        stored: crc,
                        computed: c,
                    });
                }
            }
            let data = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            tensors.insert(name, Tensor { shape: entry.shape, data });
        }
        if !blob_ok {
            return Err(Error::Checksum {
                name: "<blob>".into(),
                stored,
                computed,
            });
        }
        Ok(Self { tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::util::write_atomic(path.as_ref(), &self.to_bytes()?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TensorArchive {
        let mut a = TensorArchive::new();
        a.insert("b", Tensor::new(vec![2], vec![1.0, -1.0]).unwrap());
        a.insert("a.weight", Tensor::new(vec![2, 3], (0..6).map(|i| i as f32 * 0.5).collect()).unwrap());
        a
    }

    #[test]
    fn byte_layout() {
        let bytes = sample().to_bytes().unwrap();
        assert_eq!(&bytes[..8], b"SVDDTNSR");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&bytes[16..16 + hlen]).unwrap();
        assert_eq!(header["a.weight"]["offset"], 0);
        assert_eq!(header["a.weight"]["byte_length"], 24);
        assert_eq!(header["b"]["offset"], 24);
        let blob = &bytes[16 + hlen..bytes.len() - 4];
        assert_eq!(blob.len(), 32);
        assert_eq!(&blob[24..28], &1.0f32.to_le_bytes());
        let crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        assert_eq!(crc, crc32fast::hash(blob));
    }

    #[test]
    fn corruption_names_the_tensor() {
        let mut bytes = sample().to_bytes().unwrap();
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        bytes[16 + hlen + 25] ^= 0x40; // inside tensor `b`
        match TensorArchive::from_bytes(&bytes) {
            Err(Error::Checksum { name, .. }) => assert_eq!(name, "b"),
            other => panic!("expected checksum error, got {other:?}"),
        }
    }

    #[test]
    fn trailing_crc_is_checked() {
        let mut bytes = sample().to_bytes().unwrap();
        let n = bytes.len();
        bytes[n - 1] ^= 1;
        assert!(matches!(
            TensorArchive::from_bytes(&bytes),
            Err(Error::Checksum { name, .. }) if name == "<blob>"
        ));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[0] = b'X';
        assert!(matches!(TensorArchive::from_bytes(&bytes), Err(Error::Archive(_))));
        let mut bytes = sample().to_bytes().unwrap();
        bytes[8] = 2;
        assert!(matches!(TensorArchive::from_bytes(&bytes), Err(Error::Archive(_))));
    }

    #[test]
    fn expect_reports_shape_and_missing() {
        let a = sample();
        assert!(a.expect("a.weight", &[2, 3]).is_ok());
        assert!(matches!(a.expect("a.weight", &[3, 2]), Err(Error::TensorShape { .. })));
        assert!(matches!(a.expect("zzz", &[1]), Err(Error::MissingTensor(_))));
    }
}
