//! `SGT1` tensor container: magic, dtype byte (0 = f32, 1 = u8), rank byte,
//! two zero bytes, `u32` dims and a row-major payload, all little-endian.

use std::path::Path;

use super::{read_file, write_file, IoError, Reader};
use crate::stack::{ImageStack, MaskStack, Spacing};

const MAGIC: &[u8; 4] = b"SGT1";

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32 { dims: Vec<usize>, data: Vec<f32> },
    U8 { dims: Vec<usize>, data: Vec<u8> },
}

impl TensorData {
    pub fn dims(&self) -> &[usize] {
        match self {
            Self::F32 { dims, .. } | Self::U8 { dims, .. } => dims,
        }
    }

    fn dtype_name(&self) -> &'static str {
        match self {
            Self::F32 { .. } => "f32",
            Self::U8 { .. } => "u8",
        }
    }
}

pub fn encode_tensor(t: &TensorData) -> Result<Vec<u8>, IoError> {
    let dims = t.dims();
    if dims.len() > u8::MAX as usize || dims.iter().any(|&d| d > u32::MAX as usize) {
        return Err(IoError::DimOverflow(dims.iter().map(|&d| d as u64).collect()));
    }
    let (code, payload): (u8, Vec<u8>) = match t {
        TensorData::F32 { data, .. } => (0, data.iter().flat_map(|v| v.to_le_bytes()).collect()),
        TensorData::U8 { data, .. } => (1, data.clone()),
    };
    let n: usize = dims.iter().product();
    let size = if code == 0 { 4 } else { 1 };
    if payload.len() != n * size {
        return Err(IoError::Corrupt(format!("dims {dims:?} do not match {} payload bytes", payload.len())));
    }
    let mut out = Vec::with_capacity(8 + 4 * dims.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[code, dims.len() as u8, 0, 0]);
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<TensorData, IoError> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(IoError::BadMagic { expected: "SGT1" });
    }
    let code = r.u8()?;
    let ndim = r.u8()? as usize;
    if r.take(2)? != [0, 0] {
        return Err(IoError::Corrupt("reserved bytes are not zero".into()));
    }
    let size = match code {
        0 => 4,
        1 => 1,
        c => return Err(IoError::Corrupt(format!("unknown dtype code {c}"))),
    };
    let dims = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
    let bytes_needed = dims
        .iter()
        .try_fold(size, |acc: usize, &d| acc.checked_mul(d))
        .ok_or_else(|| IoError::DimOverflow(dims.iter().map(|&d| d as u64).collect()))?;
    if r.remaining() != bytes_needed {
        return Err(IoError::Corrupt(format!(
            "dims {dims:?} need {bytes_needed} payload bytes, found {}",
            r.remaining()
        )));
    }
    let payload = r.take(bytes_needed)?;
    Ok(match code {
        0 => TensorData::F32 {
            dims,
            data: payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect(),
        },
        _ => TensorData::U8 { dims, data: payload.to_vec() },
    })
}

pub fn write_tensor(path: &Path, t: &TensorData) -> Result<(), IoError> {
    write_file(path, encode_tensor(t)?)
}

pub fn read_tensor(path: &Path) -> Result<TensorData, IoError> {
    decode_tensor(&read_file(path)?)
}

fn stack_dims(dims: &[usize]) -> Result<[usize; 3], IoError> {
    dims.try_into().map_err(|_| IoError::Corrupt(format!("expected a [S, H, W] tensor, got dims {dims:?}")))
}

pub fn write_image_stack(path: &Path, stack: &ImageStack) -> Result<(), IoError> {
    write_tensor(path, &TensorData::F32 { dims: stack.dims().to_vec(), data: stack.data().to_vec() })
}

pub fn write_mask_stack(path: &Path, stack: &MaskStack) -> Result<(), IoError> {
    write_tensor(path, &TensorData::U8 { dims: stack.dims().to_vec(), data: stack.data().to_vec() })
}

pub fn read_image_stack(path: &Path, spacing: Spacing) -> Result<ImageStack, IoError> {
    match read_tensor(path)? {
        TensorData::F32 { dims, data } => Ok(ImageStack::new(stack_dims(&dims)?, data, spacing)?),
        other => Err(IoError::DtypeMismatch { expected: "f32", found: other.dtype_name() }),
    }
}

pub fn read_mask_stack(path: &Path, spacing: Spacing) -> Result<MaskStack, IoError> {
    match read_tensor(path)? {
        TensorData::U8 { dims, data } => Ok(MaskStack::new(stack_dims(&dims)?, data, spacing)?),
        other => Err(IoError::DtypeMismatch { expected: "u8", found: other.dtype_name() }),
    }
}
