//! DAMT tensor files.
//!
//! Layout (all integers little-endian):
//!
//! | bytes | field |
//! |-------|-------|
//! | 4     | magic `DAMT` |
//! | 1     | version, always 1 |
//! | 1     | dtype: 0 = f32, 1 = bit-packed mask |
//! | 1     | ndims |
//! | 4·ndims | dims as u32 |
//! | rest  | row-major payload |
//!
//! Mask payloads are `ceil(rows·cols / 8)` bytes, LSB-first within each
//! byte, with zero padding bits. Dense maps are stored as f32, so values are
//! rounded to single precision on write.

use std::fs;
use std::path::Path;

use crate::error::{DamError, Result};
use crate::tensor::{BitMask, DenseMap};

pub const MAGIC: [u8; 4] = *b"DAMT";
pub const VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 0;
pub const DTYPE_MASK: u8 = 1;

/// Either kind of tensor a DAMT file can hold.
#[derive(Clone, Debug, PartialEq)]
pub enum Tensor {
    Dense(DenseMap),
    Mask(BitMask),
}

impl Tensor {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Tensor::Dense(d) => d.shape(),
            Tensor::Mask(m) => m.shape(),
        }
    }

    pub fn into_dense(self) -> Result<DenseMap> {
        match self {
            Tensor::Dense(d) => Ok(d),
            Tensor::Mask(_) => Err(DamError::input("expected a dense map, found a mask")),
        }
    }

    pub fn into_mask(self) -> Result<BitMask> {
        match self {
            Tensor::Mask(m) => Ok(m),
            Tensor::Dense(_) => Err(DamError::input("expected a mask, found a dense map")),
        }
    }
}

impl From<DenseMap> for Tensor {
    fn from(d: DenseMap) -> Self {
        Tensor::Dense(d)
    }
}

impl From<BitMask> for Tensor {
    fn from(m: BitMask) -> Self {
        Tensor::Mask(m)
    }
}

/// Borrowed view used for writing without cloning.
#[derive(Clone, Copy, Debug)]
pub enum TensorRef<'a> {
    Dense(&'a DenseMap),
    Mask(&'a BitMask),
}

impl<'a> From<&'a DenseMap> for TensorRef<'a> {
    fn from(d: &'a DenseMap) -> Self {
        TensorRef::Dense(d)
    }
}

impl<'a> From<&'a BitMask> for TensorRef<'a> {
    fn from(m: &'a BitMask) -> Self {
        TensorRef::Mask(m)
    }
}

impl<'a> From<&'a Tensor> for TensorRef<'a> {
    fn from(t: &'a Tensor) -> Self {
        match t {
            Tensor::Dense(d) => TensorRef::Dense(d),
            Tensor::Mask(m) => TensorRef::Mask(m),
        }
    }
}

fn dim_u32(d: usize) -> Result<u32> {
    u32::try_from(d).map_err(|_| DamError::Format(format!("dimension {d} overflows 32 bits")))
}

pub fn encode<'a>(t: impl Into<TensorRef<'a>>) -> Result<Vec<u8>> {
    let t = t.into();
    let (dtype, rows, cols) = match t {
        TensorRef::Dense(d) => (DTYPE_F32, d.rows(), d.cols()),
        TensorRef::Mask(m) => (DTYPE_MASK, m.rows(), m.cols()),
    };
    let (r, c) = (dim_u32(rows)?, dim_u32(cols)?);
    let mut out = Vec::with_capacity(15 + rows * cols * 4);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(dtype);
    out.push(2);
    out.extend_from_slice(&r.to_le_bytes());
    out.extend_from_slice(&c.to_le_bytes());
    match t {
        TensorRef::Dense(d) => {
            for &v in d.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        TensorRef::Mask(m) => out.extend_from_slice(&m.to_packed_bytes()),
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(DamError::NotDamt);
    }
    if bytes.len() < 7 {
        return Err(DamError::Format("truncated header".into()));
    }
    let (version, dtype, ndims) = (bytes[4], bytes[5], bytes[6] as usize);
    if version != VERSION {
        return Err(DamError::UnsupportedVersion(version));
    }
    if dtype != DTYPE_F32 && dtype != DTYPE_MASK {
        return Err(DamError::UnsupportedDtype(dtype));
    }
    let header = 7 + 4 * ndims;
    if bytes.len() < header {
        return Err(DamError::Format("truncated dims".into()));
    }
    let dims: Vec<usize> = bytes[7..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let (rows, cols) = match dims[..] {
        [r, c] => (r, c),
        [n] => (1, n),
        _ => {
            return Err(DamError::input(format!("expected a 2-D tensor, found rank {ndims}")));
        }
    };
    let cells = rows
        .checked_mul(cols)
        .ok_or_else(|| DamError::Format("dims product overflows".into()))?;
    let payload = &bytes[header..];
    match dtype {
        DTYPE_F32 => {
            let expected = cells * 4;
            if payload.len() != expected {
                return Err(DamError::Length { expected, actual: payload.len() });
            }
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            Ok(Tensor::Dense(DenseMap::from_vec(rows, cols, data)?))
        }
        _ => Ok(Tensor::Mask(BitMask::from_packed_bytes(rows, cols, payload)?)),
    }
}

pub fn write_tensor<'a>(path: impl AsRef<Path>, t: impl Into<TensorRef<'a>>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(t)?;
    fs::write(path, bytes).map_err(|e| DamError::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| DamError::io(path, e))?;
    decode(&bytes)
}
