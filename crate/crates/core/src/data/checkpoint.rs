//! The `DENCMDv1` model checkpoint.
//!
//! ```text
//! "DENCMDv1"                 8 bytes
//! manifest length            u64 LE
//! manifest                   UTF-8 JSON (see `ModelManifest`)
//! parameters                 tensors in manifest order, dtype LE, row-major
//! checksum                   u64 LE, FNV-1a 64 over every preceding byte
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::bytes::{fnv1a64, write_header, Reader};
use crate::data::format::BYTE_ORDER;
use crate::delta::{ArchConfig, DeltaEncoderModel, TrainingFingerprint};
use crate::error::{Error, FormatError, Result};
use crate::nn::{Parameterized, Scalar};

pub const MODEL_MAGIC: &[u8; 8] = b"DENCMDv1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub arch: ArchConfig,
    pub dtype: String,
    pub fingerprint: TrainingFingerprint,
    pub tensors: Vec<TensorEntry>,
    pub byte_order: String,
}

pub fn encode_model<T: Scalar>(model: &DeltaEncoderModel<T>) -> Vec<u8> {
    let params = model.params();
    let manifest = ModelManifest {
        arch: model.arch,
        dtype: T::DTYPE.into(),
        fingerprint: model.fingerprint.clone(),
        tensors: params
            .iter()
            .map(|(name, p)| TensorEntry {
                name: name.clone(),
                len: p.len(),
            })
            .collect(),
        byte_order: BYTE_ORDER.into(),
    };
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut out = Vec::with_capacity(24 + json.len() + model.param_count() * T::BYTES);
    write_header(&mut out, MODEL_MAGIC, &json);
    for (_, p) in &params {
        for &v in *p {
            v.write_le(&mut out);
        }
    }
    let sum = fnv1a64(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

fn read_manifest(bytes: &[u8]) -> Result<(ModelManifest, Reader<'_>)> {
    let mut r = Reader::new(bytes);
    r.magic(MODEL_MAGIC)?;
    let m: ModelManifest = r.manifest()?;
    if m.byte_order != BYTE_ORDER {
        return Err(FormatError::Manifest(format!("unsupported byte order {:?}", m.byte_order)).into());
    }
    Ok((m, r))
}

pub fn decode_model<T: Scalar>(bytes: &[u8]) -> Result<DeltaEncoderModel<T>> {
    let (m, mut r) = read_manifest(bytes)?;
    if m.dtype != T::DTYPE {
        return Err(FormatError::Dtype {
            expected: T::DTYPE.into(),
            found: m.dtype,
        }
        .into());
    }
    m.arch
        .validate()
        .map_err(|e| FormatError::ArchMismatch(format!("header architecture is invalid: {e}")))?;
    let mut model = DeltaEncoderModel::<T>::build(m.arch, m.fingerprint.init_seed)?;
    let expected: Vec<TensorEntry> = model
        .params()
        .iter()
        .map(|(name, p)| TensorEntry {
            name: name.clone(),
            len: p.len(),
        })
        .collect();
    if expected != m.tensors {
        return Err(FormatError::ArchMismatch(format!(
            "{} tensors listed, architecture {:?} implies {}",
            m.tensors.len(),
            m.arch,
            expected.len()
        ))
        .into());
    }
    let total: usize = expected.iter().map(|t| t.len).sum();
    let flat = r.scalars::<T>("parameters", total)?;
    let body_end = r.position();
    let stored = r.u64("checksum")?;
    r.finish()?;
    let computed = fnv1a64(&bytes[..body_end]);
    if stored != computed {
        return Err(FormatError::Checksum { stored, computed }.into());
    }
    model.set_flat_params(&flat);
    model.fingerprint = m.fingerprint;
    Ok(model)
}

pub fn save_model<T: Scalar>(model: &DeltaEncoderModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<DeltaEncoderModel<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

/// Element type tag stored in a checkpoint header (`"f32"` or `"f64"`).
pub fn read_checkpoint_dtype(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(read_manifest(&bytes)?.0.dtype)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delta::Variant;

    fn small(variant: Variant) -> ArchConfig {
        ArchConfig {
            feature_dim: 6,
            hidden_dim: 5,
            z_dim: 2,
            attribute_dim: 0,
            variant,
        }
    }

    #[test]
    fn round_trip_keeps_everything() {
        let mut m = DeltaEncoderModel::<f32>::build(small(Variant::Full), 9).unwrap();
        m.fingerprint.trained = true;
        m.fingerprint.loss_history = vec![3.0, 2.5];
        let back = decode_model::<f32>(&encode_model(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn closed_form_round_trip() {
        let m = DeltaEncoderModel::<f64>::build(small(Variant::LinearOffset), 1).unwrap();
        assert_eq!(decode_model::<f64>(&encode_model(&m)).unwrap(), m);
    }

    #[test]
    fn flipped_parameter_byte_fails_checksum() {
        let m = DeltaEncoderModel::<f32>::build(small(Variant::Full), 2).unwrap();
        let mut bytes = encode_model(&m);
        let i = bytes.len() - 12;
        bytes[i] ^= 0x40;
        assert!(matches!(
            decode_model::<f32>(&bytes),
            Err(Error::Format(FormatError::Checksum { .. }))
        ));
    }

    #[test]
    fn wrong_dtype_is_reported() {
        let m = DeltaEncoderModel::<f32>::build(small(Variant::Full), 2).unwrap();
        assert!(matches!(
            decode_model::<f64>(&encode_model(&m)),
            Err(Error::Format(FormatError::Dtype { .. }))
        ));
    }

    #[test]
    fn header_arch_must_match_tensors() {
        let m = DeltaEncoderModel::<f32>::build(small(Variant::Full), 2).unwrap();
        let mut other = DeltaEncoderModel::<f32>::build(small(Variant::AeNonparam), 2).unwrap();
        // splice the full model's tensor list under the other arch
        other.fingerprint = m.fingerprint.clone();
        let good = encode_model(&m);
        let (mut manifest, _) = read_manifest(&good).unwrap();
        manifest.arch = other.arch;
        let json = serde_json::to_vec(&manifest).unwrap();
        let mut forged = Vec::new();
        write_header(&mut forged, MODEL_MAGIC, &json);
        assert!(matches!(
            decode_model::<f32>(&forged),
            Err(Error::Format(FormatError::ArchMismatch(_)))
        ));
    }

    #[test]
    fn truncated_checkpoint() {
        let m = DeltaEncoderModel::<f32>::build(small(Variant::Full), 2).unwrap();
        let bytes = encode_model(&m);
        assert!(matches!(
            decode_model::<f32>(&bytes[..bytes.len() - 9]),
            Err(Error::Format(FormatError::Truncated { .. }))
        ));
    }
}
