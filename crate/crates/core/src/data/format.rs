//! The `DENCFSv1` feature-file format.
//!
//! ```text
//! "DENCFSv1"                 8 bytes
//! manifest length            u64 LE
//! manifest                   UTF-8 JSON (see `DatasetManifest`)
//! features                   n * d  f32 LE, row-major
//! labels                     n      u32 LE
//! attributes (optional)      classes * attribute_dim  f32 LE, row-major
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::bytes::{write_header, Reader};
use crate::data::{FeatureDataset, Split};
use crate::error::{Error, FormatError, Result};
use crate::nn::{Matrix, Scalar};

pub const DATASET_MAGIC: &[u8; 8] = b"DENCFSv1";
pub const BYTE_ORDER: &str = "little-endian";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub n: usize,
    pub d: usize,
    pub class_names: Vec<String>,
    pub splits: Vec<Split>,
    pub attribute_dim: usize,
    pub byte_order: String,
}

pub fn encode_dataset(ds: &FeatureDataset) -> Vec<u8> {
    let manifest = DatasetManifest {
        n: ds.len(),
        d: ds.dim(),
        class_names: ds.class_names().to_vec(),
        splits: ds.splits().to_vec(),
        attribute_dim: ds.attribute_dim(),
        byte_order: BYTE_ORDER.into(),
    };
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let attr_len = ds.attributes().map_or(0, |a| a.as_slice().len());
    let mut out = Vec::with_capacity(16 + json.len() + 4 * (ds.features().as_slice().len() + ds.len() + attr_len));
    write_header(&mut out, DATASET_MAGIC, &json);
    for &v in ds.features().as_slice() {
        v.write_le(&mut out);
    }
    for &l in ds.labels() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    if let Some(a) = ds.attributes() {
        for &v in a.as_slice() {
            v.write_le(&mut out);
        }
    }
    out
}

pub fn decode_dataset(bytes: &[u8]) -> Result<FeatureDataset> {
    let mut r = Reader::new(bytes);
    r.magic(DATASET_MAGIC)?;
    let m: DatasetManifest = r.manifest()?;
    if m.byte_order != BYTE_ORDER {
        return Err(FormatError::Manifest(format!("unsupported byte order {:?}", m.byte_order)).into());
    }
    if m.splits.len() != m.class_names.len() {
        return Err(FormatError::Manifest(format!(
            "{} split tags for {} classes",
            m.splits.len(),
            m.class_names.len()
        ))
        .into());
    }
    let count = m
        .n
        .checked_mul(m.d)
        .ok_or_else(|| FormatError::Manifest("n * d overflows".into()))?;
    let features = r.scalars::<f32>("features", count)?;
    let labels = r.u32s("labels", m.n)?;
    let classes = m.class_names.len();
    if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l as usize >= classes) {
        return Err(FormatError::LabelOutOfRange { row, label, classes }.into());
    }
    let attributes = if m.attribute_dim > 0 {
        let a = r.scalars::<f32>("attributes", classes * m.attribute_dim)?;
        Some(Matrix::from_vec(classes, m.attribute_dim, a)?)
    } else {
        None
    };
    r.finish()?;
    FeatureDataset::new(
        Matrix::from_vec(m.n, m.d, features)?,
        labels,
        m.class_names,
        m.splits,
        attributes,
    )
}

pub fn save_dataset(ds: &FeatureDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_dataset(ds)).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<FeatureDataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> FeatureDataset {
        let f = Matrix::from_vec(2, 4, vec![0.5, -1.0, 2.0, 0.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        FeatureDataset::new(f, vec![0, 0], vec!["only".into()], vec![Split::Seen], None).unwrap()
    }

    #[test]
    fn minimal_file_round_trips() {
        let bytes = encode_dataset(&minimal());
        assert_eq!(&bytes[..8], b"DENCFSv1");
        let back = decode_dataset(&bytes).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back, minimal());
    }

    #[test]
    fn truncated_blob() {
        let bytes = encode_dataset(&minimal());
        let err = decode_dataset(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(matches!(err, Error::Format(FormatError::Truncated { .. })), "{err}");
    }

    #[test]
    fn wrong_magic_and_version() {
        let mut bytes = encode_dataset(&minimal());
        bytes[7] = b'9';
        assert!(matches!(decode_dataset(&bytes), Err(Error::Format(FormatError::Version { .. }))));
        bytes[0] = b'X';
        assert!(matches!(decode_dataset(&bytes), Err(Error::Format(FormatError::BadMagic { .. }))));
    }

    #[test]
    fn label_out_of_range() {
        let mut bytes = encode_dataset(&minimal());
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&5u32.to_le_bytes());
        assert!(matches!(
            decode_dataset(&bytes),
            Err(Error::Format(FormatError::LabelOutOfRange { row: 1, label: 5, .. }))
        ));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = encode_dataset(&minimal());
        bytes.push(0);
        assert!(matches!(decode_dataset(&bytes), Err(Error::Format(FormatError::TrailingBytes(1)))));
    }

    #[test]
    fn attributes_round_trip() {
        let f = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let a = Matrix::from_vec(2, 3, vec![0.1, 0.2, 0.3, -0.1, -0.2, -0.3]).unwrap();
        let ds = FeatureDataset::new(
            f,
            vec![0, 1],
            vec!["a, with comma".into(), "b".into()],
            vec![Split::Seen, Split::Unseen],
            Some(a),
        )
        .unwrap();
        assert_eq!(decode_dataset(&encode_dataset(&ds)).unwrap(), ds);
    }
}
