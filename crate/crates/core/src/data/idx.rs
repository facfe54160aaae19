//! IDX binary tensor format (the MNIST distribution format).
//!
//! Header: two zero bytes, an element-type code, a dimension count, then one
//! big-endian u32 per dimension, followed by the big-endian payload. The
//! parser validates the payload length exactly and never reads past the end
//! of the input.

use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

use crate::error::{Error as CrateError, Result as CrateResult};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdxError {
    #[error("input too short: {len} bytes, the header needs at least 4")]
    TooShort { len: usize },

    #[error("bad magic at offset 0: leading bytes must be zero, got {b0:#04x} {b1:#04x}")]
    BadMagic { b0: u8, b1: u8 },

    #[error("unsupported element type code {code:#04x} at offset 2")]
    UnsupportedType { code: u8 },

    #[error("truncated header: dimension {dim} runs past the end at offset {offset}")]
    TruncatedHeader { dim: usize, offset: usize },

    #[error("dimension sizes overflow the addressable payload size")]
    Overflow,

    #[error(
        "truncated payload: expected {expected} bytes, found {found}; \
         first missing byte at offset {offset}"
    )]
    TruncatedPayload {
        offset: usize,
        expected: usize,
        found: usize,
    },

    #[error("{count} trailing bytes after the payload, starting at offset {offset}")]
    TrailingBytes { offset: usize, count: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum IdxData {
    U8(Vec<u8>),
    I8(Vec<i8>),
    I16(Vec<i16>),
    I32(Vec<i32>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl IdxData {
    pub fn len(&self) -> usize {
        match self {
            IdxData::U8(v) => v.len(),
            IdxData::I8(v) => v.len(),
            IdxData::I16(v) => v.len(),
            IdxData::I32(v) => v.len(),
            IdxData::F32(v) => v.len(),
            IdxData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        match self {
            IdxData::U8(v) => v.iter().map(|&x| x as f64).collect(),
            IdxData::I8(v) => v.iter().map(|&x| x as f64).collect(),
            IdxData::I16(v) => v.iter().map(|&x| x as f64).collect(),
            IdxData::I32(v) => v.iter().map(|&x| x as f64).collect(),
            IdxData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            IdxData::F64(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: IdxData,
}

impl IdxTensor {
    pub fn element_count(&self) -> usize {
        self.data.len()
    }

    pub fn type_code(&self) -> u8 {
        match self.data {
            IdxData::U8(_) => 0x08,
            IdxData::I8(_) => 0x09,
            IdxData::I16(_) => 0x0B,
            IdxData::I32(_) => 0x0C,
            IdxData::F32(_) => 0x0D,
            IdxData::F64(_) => 0x0E,
        }
    }
}

fn element_size(code: u8) -> Option<usize> {
    match code {
        0x08 | 0x09 => Some(1),
        0x0B => Some(2),
        0x0C | 0x0D => Some(4),
        0x0E => Some(8),
        _ => None,
    }
}

/// Parses a complete IDX byte stream. Total over arbitrary input: every
/// failure is a structured error, and no read goes past `bytes.len()`.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor, IdxError> {
    if bytes.len() < 4 {
        return Err(IdxError::TooShort { len: bytes.len() });
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(IdxError::BadMagic {
            b0: bytes[0],
            b1: bytes[1],
        });
    }
    let code = bytes[2];
    let elem_size = element_size(code).ok_or(IdxError::UnsupportedType { code })?;
    let ndims = bytes[3] as usize;

    let mut dims = Vec::with_capacity(ndims);
    let mut offset = 4usize;
    for dim in 0..ndims {
        if bytes.len() < offset + 4 {
            return Err(IdxError::TruncatedHeader {
                dim,
                offset: bytes.len(),
            });
        }
        let size = u32::from_be_bytes(bytes[offset..offset + 4].try_into().unwrap());
        dims.push(size as usize);
        offset += 4;
    }

    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or(IdxError::Overflow)?;
    let expected = count.checked_mul(elem_size).ok_or(IdxError::Overflow)?;
    let found = bytes.len() - offset;
    if found < expected {
        return Err(IdxError::TruncatedPayload {
            offset: bytes.len(),
            expected,
            found,
        });
    }
    if found > expected {
        return Err(IdxError::TrailingBytes {
            offset: offset + expected,
            count: found - expected,
        });
    }

    let payload = &bytes[offset..offset + expected];
    let data = match code {
        0x08 => IdxData::U8(payload.to_vec()),
        0x09 => IdxData::I8(payload.iter().map(|&b| b as i8).collect()),
        0x0B => IdxData::I16(
            payload
                .chunks_exact(2)
                .map(|c| i16::from_be_bytes([c[0], c[1]]))
                .collect(),
        ),
        0x0C => IdxData::I32(
            payload
                .chunks_exact(4)
                .map(|c| i32::from_be_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ),
        0x0D => IdxData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_be_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ),
        0x0E => IdxData::F64(
            payload
                .chunks_exact(8)
                .map(|c| f64::from_be_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        _ => unreachable!("type code validated above"),
    };
    Ok(IdxTensor { dims, data })
}

/// Serializes a tensor back to IDX bytes (fixtures and tests).
pub fn write_idx(tensor: &IdxTensor) -> Vec<u8> {
    let mut out = vec![0u8, 0u8, tensor.type_code(), tensor.dims.len() as u8];
    for &d in &tensor.dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    match &tensor.data {
        IdxData::U8(v) => out.extend_from_slice(v),
        IdxData::I8(v) => out.extend(v.iter().map(|&x| x as u8)),
        IdxData::I16(v) => {
            for x in v {
                out.extend_from_slice(&x.to_be_bytes());
            }
        }
        IdxData::I32(v) => {
            for x in v {
                out.extend_from_slice(&x.to_be_bytes());
            }
        }
        IdxData::F32(v) => {
            for x in v {
                out.extend_from_slice(&x.to_be_bytes());
            }
        }
        IdxData::F64(v) => {
            for x in v {
                out.extend_from_slice(&x.to_be_bytes());
            }
        }
    }
    out
}

/// Loads an MNIST image file as an `N x (rows*cols)` matrix scaled to [0, 1].
pub fn load_mnist_images(path: &Path) -> CrateResult<Array2<f64>> {
    let bytes = std::fs::read(path)?;
    let tensor = parse_idx(&bytes).map_err(CrateError::Idx)?;
    if tensor.dims.len() != 3 {
        return Err(CrateError::data(format!(
            "{}: expected a 3-D image tensor, got {} dims",
            path.display(),
            tensor.dims.len()
        )));
    }
    let (n, h, w) = (tensor.dims[0], tensor.dims[1], tensor.dims[2]);
    let IdxData::U8(raw) = &tensor.data else {
        return Err(CrateError::data(format!(
            "{}: expected unsigned-byte pixels",
            path.display()
        )));
    };
    let values: Vec<f64> = raw.iter().map(|&b| b as f64 / 255.0).collect();
    Array2::from_shape_vec((n, h * w), values).map_err(|e| CrateError::data(e.to_string()))
}

/// Loads an MNIST label file as class indices.
pub fn load_mnist_labels(path: &Path) -> CrateResult<Vec<usize>> {
    let bytes = std::fs::read(path)?;
    let tensor = parse_idx(&bytes).map_err(CrateError::Idx)?;
    if tensor.dims.len() != 1 {
        return Err(CrateError::data(format!(
            "{}: expected a 1-D label tensor, got {} dims",
            path.display(),
            tensor.dims.len()
        )));
    }
    let IdxData::U8(raw) = &tensor.data else {
        return Err(CrateError::data(format!(
            "{}: expected unsigned-byte labels",
            path.display()
        )));
    };
    Ok(raw.iter().map(|&b| b as usize).collect())
}
