//! Model checkpoints: a JSON manifest describing topology and parameter
//! shapes plus a little-endian binary blob of all parameter values in
//! manifest order. Round-trips are bit-exact.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::neural::tensor::{Parameter, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error("blob holds {actual} bytes, manifest expects {expected}")]
    BlobLength { expected: usize, actual: usize },
    #[error("unsupported checkpoint format version {0}")]
    Version(u32),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    /// Caller-owned topology, configuration, and seed description.
    pub model: serde_json::Value,
    pub params: Vec<ParamSpec>,
    pub blob_len: u64,
}

pub fn manifest_path(stem: &Path) -> PathBuf {
    stem.with_extension("manifest.json")
}

pub fn blob_path(stem: &Path) -> PathBuf {
    stem.with_extension("params.bin")
}

pub fn encode_blob(params: &[&Parameter]) -> (Vec<ParamSpec>, Vec<u8>) {
    let mut specs = Vec::with_capacity(params.len());
    let mut blob = Vec::new();
    for p in params {
        specs.push(ParamSpec {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
        });
        for v in p.value.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    (specs, blob)
}

pub fn decode_blob(specs: &[ParamSpec], blob: &[u8]) -> Result<Vec<Parameter>, CheckpointError> {
    let total: usize = specs
        .iter()
        .map(|s| s.shape.iter().product::<usize>() * 8)
        .sum();
    if blob.len() != total {
        return Err(CheckpointError::BlobLength {
            expected: total,
            actual: blob.len(),
        });
    }
    let mut params = Vec::with_capacity(specs.len());
    let mut offset = 0;
    for spec in specs {
        let count: usize = spec.shape.iter().product();
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            let mut bytes = [0u8; 8];
            bytes.copy_from_slice(&blob[offset..offset + 8]);
            data.push(f64::from_le_bytes(bytes));
            offset += 8;
        }
        // bypass the finiteness check; a stored value is restored verbatim
        let mut value = Tensor::zeros(&spec.shape);
        value.data_mut().copy_from_slice(&data);
        params.push(Parameter::new(spec.name.clone(), value));
    }
    Ok(params)
}

/// Writes `<stem>.manifest.json` and `<stem>.params.bin`.
pub fn save(
    stem: &Path,
    model: serde_json::Value,
    params: &[&Parameter],
) -> Result<(), CheckpointError> {
    let (specs, blob) = encode_blob(params);
    let manifest = Manifest {
        format_version: 1,
        model,
        params: specs,
        blob_len: blob.len() as u64,
    };
    if let Some(dir) = stem.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(manifest_path(stem), serde_json::to_vec_pretty(&manifest)?)?;
    fs::write(blob_path(stem), blob)?;
    Ok(())
}

pub fn load(stem: &Path) -> Result<(Manifest, Vec<Parameter>), CheckpointError> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(manifest_path(stem))?)?;
    if manifest.format_version != 1 {
        return Err(CheckpointError::Version(manifest.format_version));
    }
    let blob = fs::read(blob_path(stem))?;
    if blob.len() as u64 != manifest.blob_len {
        return Err(CheckpointError::BlobLength {
            expected: manifest.blob_len as usize,
            actual: blob.len(),
        });
    }
    let params = decode_blob(&manifest.params, &blob)?;
    Ok((manifest, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_round_trip_is_bit_exact() {
        let values = vec![0.1, -2.5e-300, f64::MAX, 3.0f64.sqrt(), -0.0];
        let p1 = Parameter::new("a", Tensor::from_vec(&[5], values).unwrap());
        let p2 = Parameter::new("b", Tensor::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap());
        let (specs, blob) = encode_blob(&[&p1, &p2]);
        let restored = decode_blob(&specs, &blob).unwrap();
        assert_eq!(restored.len(), 2);
        for (orig, back) in [&p1, &p2].iter().zip(restored.iter()) {
            assert_eq!(orig.name, back.name);
            assert_eq!(orig.value.shape(), back.value.shape());
            for (a, b) in orig.value.data().iter().zip(back.value.data().iter()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let p = Parameter::new("a", Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap());
        let (specs, blob) = encode_blob(&[&p]);
        assert!(matches!(
            decode_blob(&specs, &blob[..blob.len() - 1]),
            Err(CheckpointError::BlobLength { .. })
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("model");
        let p = Parameter::new("w", Tensor::from_vec(&[2, 2], vec![1.0, -1.0, 0.5, 2.0]).unwrap());
        save(&stem, serde_json::json!({"kind": "test"}), &[&p]).unwrap();
        let (manifest, params) = load(&stem).unwrap();
        assert_eq!(manifest.model["kind"], "test");
        assert_eq!(params[0].value.data(), p.value.data());
    }
}
