//! SFM1: a small self-describing container for one real matrix.
//!
//! Layout (all integers little-endian):
//!
//! | bytes | field                        |
//! |-------|------------------------------|
//! | 4     | magic `SFM1`                 |
//! | 2     | version (`1`)                |
//! | 1     | dtype (`0` = f32, `1` = f64) |
//! | 1     | reserved (`0`)               |
//! | 8     | rows                         |
//! | 8     | cols                         |
//! | 4     | metadata length in bytes     |
//! | n     | UTF-8 JSON metadata          |
//! | ...   | row-major payload            |

use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 4] = b"SFM1";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// A decoded SFM1 file.
#[derive(Clone, Debug, PartialEq)]
pub struct Sfm1 {
    pub matrix: Matrix,
    pub metadata: Map<String, Value>,
    pub dtype: Dtype,
}

pub fn encode_sfm1(matrix: &Matrix, metadata: &Map<String, Value>, dtype: Dtype) -> Result<Vec<u8>> {
    if !matrix.is_finite() {
        return Err(Error::NonFinite {
            context: "matrix passed to SFM1 writer".into(),
        });
    }
    let meta = serde_json::to_vec(metadata)?;
    let meta_len = u32::try_from(meta.len())
        .map_err(|_| Error::InvalidArgument("SFM1 metadata exceeds 4 GiB".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + meta.len() + matrix.len() * dtype.width());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(dtype.code());
    out.push(0);
    out.extend_from_slice(&(matrix.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(matrix.cols() as u64).to_le_bytes());
    out.extend_from_slice(&meta_len.to_le_bytes());
    out.extend_from_slice(&meta);
    match dtype {
        Dtype::F32 => {
            for &v in matrix.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Dtype::F64 => {
            for &v in matrix.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

fn format_err(offset: usize, reason: impl Into<String>) -> Error {
    Error::Format {
        what: "SFM1",
        offset: offset as u64,
        reason: reason.into(),
    }
}

fn take<'a>(bytes: &'a [u8], offset: usize, n: usize, field: &str) -> Result<&'a [u8]> {
    bytes
        .get(offset..offset + n)
        .ok_or_else(|| format_err(offset, format!("truncated while reading {field}")))
}

/// Decodes an SFM1 buffer. The buffer must hold exactly one file.
pub fn decode_sfm1(bytes: &[u8]) -> Result<Sfm1> {
    let magic = take(bytes, 0, 4, "magic")?;
    if magic != MAGIC {
        return Err(format_err(0, format!("bad magic {magic:?}")));
    }
    let version = u16::from_le_bytes(take(bytes, 4, 2, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    let dtype = match take(bytes, 6, 1, "dtype")?[0] {
        0 => Dtype::F32,
        1 => Dtype::F64,
        other => return Err(format_err(6, format!("unknown dtype code {other}"))),
    };
    let rows = u64::from_le_bytes(take(bytes, 8, 8, "rows")?.try_into().unwrap());
    let cols = u64::from_le_bytes(take(bytes, 16, 8, "cols")?.try_into().unwrap());
    let meta_len = u32::from_le_bytes(take(bytes, 24, 4, "metadata length")?.try_into().unwrap()) as usize;
    let meta_bytes = take(bytes, HEADER_LEN, meta_len, "metadata")?;
    let metadata = match serde_json::from_slice::<Value>(meta_bytes) {
        Ok(Value::Object(map)) => map,
        Ok(_) => return Err(format_err(HEADER_LEN, "metadata is not a JSON object")),
        Err(e) => return Err(format_err(HEADER_LEN, format!("metadata is not valid JSON: {e}"))),
    };
    let count = rows
        .checked_mul(cols)
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| format_err(8, "rows*cols overflows"))?;
    let start = HEADER_LEN + meta_len;
    let payload_len = count
        .checked_mul(dtype.width())
        .ok_or_else(|| format_err(8, "payload size overflows"))?;
    let payload = take(bytes, start, payload_len, "payload")?;
    if bytes.len() != start + payload_len {
        return Err(format_err(
            start + payload_len,
            format!("{} trailing bytes", bytes.len() - start - payload_len),
        ));
    }
    let data: Vec<f64> = match dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(format_err(start + i * dtype.width(), "non-finite payload value"));
    }
    Ok(Sfm1 {
        matrix: Matrix::new(rows as usize, cols as usize, data)?,
        metadata,
        dtype,
    })
}

pub fn write_sfm1(path: impl AsRef<Path>, matrix: &Matrix, metadata: &Map<String, Value>, dtype: Dtype) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_sfm1(matrix, metadata, dtype)?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_sfm1(path: impl AsRef<Path>) -> Result<Sfm1> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_sfm1(&bytes)
}
