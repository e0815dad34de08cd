//! Checkpoint container.
//!
//! `PKCK` magic, `u16` version, `u32` header length, a JSON header
//! ([`CheckpointHeader`]), then for every parameter tensor a `u64` byte
//! length followed by one f64 SFM1 blob. All integers little-endian.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{ModelParams, Variant};
use crate::attention::ScaleMode;
use crate::data::sfm1::{decode_sfm1, encode_sfm1, Dtype};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PKCK";
const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub variant: Variant,
    pub d: usize,
    pub f: usize,
    pub seed: u64,
    pub scale: ScaleMode,
    pub schema_hash: String,
    pub tensors: Vec<String>,
}

fn bad(offset: usize, reason: impl Into<String>) -> Error {
    Error::Format {
        what: "checkpoint",
        offset: offset as u64,
        reason: reason.into(),
    }
}

pub fn encode_checkpoint(params: &ModelParams, schema_hash: &str) -> Result<Vec<u8>> {
    let header = CheckpointHeader {
        variant: params.variant,
        d: params.d,
        f: params.f,
        seed: params.seed,
        scale: params.scale,
        schema_hash: schema_hash.to_string(),
        tensors: params.names().into_iter().map(String::from).collect(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for (name, tensor) in header.tensors.iter().zip(params.tensors()) {
        let mut meta = Map::new();
        meta.insert("name".into(), Value::String(name.clone()));
        let blob = encode_sfm1(tensor, &meta, Dtype::F64)?;
        out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
        out.extend_from_slice(&blob);
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(CheckpointHeader, ModelParams)> {
    if bytes.get(..4) != Some(MAGIC.as_slice()) {
        return Err(bad(0, "bad magic"));
    }
    let version = bytes
        .get(4..6)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .ok_or_else(|| bad(4, "truncated version"))?;
    if version != VERSION {
        return Err(bad(4, format!("unsupported version {version}")));
    }
    let hlen = bytes
        .get(6..10)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
        .ok_or_else(|| bad(6, "truncated header length"))?;
    let hbytes = bytes.get(10..10 + hlen).ok_or_else(|| bad(10, "truncated header"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(hbytes).map_err(|e| bad(10, format!("invalid header: {e}")))?;
    let mut offset = 10 + hlen;
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for name in &header.tensors {
        let len = bytes
            .get(offset..offset + 8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()) as usize)
            .ok_or_else(|| bad(offset, format!("truncated length of tensor {name}")))?;
        offset += 8;
        let blob = bytes
            .get(offset..offset + len)
            .ok_or_else(|| bad(offset, format!("truncated tensor {name}")))?;
        let sfm = decode_sfm1(blob)?;
        if sfm.metadata.get("name").and_then(Value::as_str) != Some(name.as_str()) {
            return Err(bad(offset, format!("tensor name mismatch, expected {name}")));
        }
        tensors.push(sfm.matrix);
        offset += len;
    }
    if offset != bytes.len() {
        return Err(bad(offset, "trailing bytes"));
    }
    let params = ModelParams::from_tensors(header.variant, header.d, header.f, header.seed, header.scale, tensors)?;
    if params.names() != header.tensors {
        return Err(bad(10, "tensor list does not match the variant"));
    }
    Ok((header, params))
}

pub fn write_checkpoint(path: impl AsRef<Path>, params: &ModelParams, schema_hash: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, encode_checkpoint(params, schema_hash)?).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(CheckpointHeader, ModelParams)> {
    let path = path.as_ref();
    decode_checkpoint(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_all_variants() {
        for v in Variant::ALL {
            let p = ModelParams::init(v, 6, 4, 11).unwrap().with_scale(ScaleMode::KeyDim);
            let bytes = encode_checkpoint(&p, "abc").unwrap();
            let (h, back) = decode_checkpoint(&bytes).unwrap();
            assert_eq!(back, p);
            assert_eq!(h.schema_hash, "abc");
            assert_eq!(encode_checkpoint(&back, "abc").unwrap(), bytes);
        }
    }

    #[test]
    fn truncation_is_detected() {
        let p = ModelParams::init(Variant::CrossAttn, 3, 2, 0).unwrap();
        let bytes = encode_checkpoint(&p, "h").unwrap();
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_checkpoint(&bytes[..5]).is_err());
    }
}
