//! `SVDDFEAT v1` feature files: one ASCII header line
//! `SVDDFEAT v1 kind=<kind> T=<T> D=<D> frame_rate=<f>` followed by `T·D`
//! little-endian f32 values in time-major order.

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};

use super::{FeatureKind, FeatureMatrix};

pub fn write_feature_file(path: impl AsRef<Path>, m: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = format!(
        "SVDDFEAT v1 kind={} T={} D={} frame_rate={}\n",
        m.kind,
        m.rows(),
        m.cols(),
        m.frame_rate
    )
    .into_bytes();
    bytes.reserve(m.values().len() * 4);
    for v in m.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    crate::util::write_atomic(path, &bytes)
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bad = |reason: String| Error::FeatureFile {
        path: path.to_path_buf(),
        reason,
    };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut header = String::new();
    reader
        .read_line(&mut header)
        .map_err(|e| Error::io(path, e))?;
    let mut fields = header.trim_end().split(' ');
    if fields.next() != Some("SVDDFEAT") || fields.next() != Some("v1") {
        return Err(bad("missing `SVDDFEAT v1` magic".into()));
    }
    let (mut kind, mut rows, mut cols, mut rate) = (None, None, None, None);
    for field in fields {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| bad(format!("malformed header field `{field}`")))?;
        let num_err = |_| bad(format!("bad value for `{key}`"));
        match key {
            "kind" => kind = Some(value.parse::<FeatureKind>()?),
            "T" => rows = Some(value.parse::<usize>().map_err(num_err)?),
            "D" => cols = Some(value.parse::<usize>().map_err(num_err)?),
            "frame_rate" => rate = Some(value.parse::<f64>().map_err(|_| bad("bad frame_rate".into()))?),
            other => return Err(bad(format!("unknown header field `{other}`"))),
        }
    }
    let (Some(kind), Some(rows), Some(cols), Some(rate)) = (kind, rows, cols, rate) else {
        return Err(bad("incomplete header".into()));
    };
    let mut payload = Vec::new();
    reader
        .read_to_end(&mut payload)
        .map_err(|e| Error::io(path, e))?;
    if payload.len() != rows * cols * 4 {
        return Err(bad(format!(
            "payload has {} bytes, header promises {}",
            payload.len(),
            rows * cols * 4
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    FeatureMatrix::new(values, rows, cols, rate, kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.feat");
        let m = FeatureMatrix::new(vec![1.0, -2.5, 0.25, 3.0, 4.0, 5.0], 2, 3, 100.0, FeatureKind::Mfcc).unwrap();
        write_feature_file(&p, &m).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let header = b"SVDDFEAT v1 kind=MFCC T=2 D=3 frame_rate=100\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..header.len() + 4], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), header.len() + 24);
        let back = read_feature_file(&p).unwrap();
        assert_eq!(back.values(), m.values());
        assert_eq!(back.kind, FeatureKind::Mfcc);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.feat");
        std::fs::write(&p, b"SVDDFEAT v1 kind=LogMel T=2 D=2 frame_rate=100\n\0\0\0\0").unwrap();
        assert!(matches!(read_feature_file(&p), Err(Error::FeatureFile { .. })));
        std::fs::write(&p, b"NOPE v1\n").unwrap();
        assert!(matches!(read_feature_file(&p), Err(Error::FeatureFile { .. })));
    }
}
