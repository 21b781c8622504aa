//! `SGM1` checkpoint: magic, length-prefixed model config, `u64` parameter
//! count, f32 parameters in canonical order, FNV-1a 64 checksum of the
//! parameter bytes.

use std::path::Path;

use super::{read_file, write_file, IoError, Reader};
use crate::model::{ModelConfig, ModelParams};

const MAGIC: &[u8; 4] = b"SGM1";

/// 64-bit FNV-1a hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

fn encode_config(c: &ModelConfig) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(c.encode_channels.len() as u32).to_le_bytes());
    for &ch in &c.encode_channels {
        out.extend_from_slice(&(ch as u32).to_le_bytes());
    }
    for v in [c.input_channels, c.output_channels, c.kernel_size, c.down_stride] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in [c.norm_epsilon, c.threshold, c.prelu_init] {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    out
}

fn decode_config(bytes: &[u8]) -> Result<ModelConfig, IoError> {
    let mut r = Reader::new(bytes);
    let n = r.u32()? as usize;
    if n > 64 {
        return Err(IoError::Corrupt(format!("{n} encode channels")));
    }
    let encode_channels = (0..n).map(|_| r.u32().map(|v| v as usize)).collect::<Result<_, _>>()?;
    let mut ints = [0usize; 4];
    for v in &mut ints {
        *v = r.u32()? as usize;
    }
    let config = ModelConfig {
        encode_channels,
        input_channels: ints[0],
        output_channels: ints[1],
        kernel_size: ints[2],
        down_stride: ints[3],
        norm_epsilon: r.f64()?,
        threshold: r.f64()?,
        prelu_init: r.f64()?,
    };
    if r.remaining() != 0 {
        return Err(IoError::Corrupt("trailing bytes in model config".into()));
    }
    Ok(config)
}

pub fn encode_checkpoint(params: &ModelParams<f32>) -> Vec<u8> {
    let config = encode_config(params.config());
    let payload: Vec<u8> = params.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    let mut out = Vec::with_capacity(24 + config.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&fnv1a64(&payload).to_le_bytes());
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParams<f32>, IoError> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(IoError::BadMagic { expected: "SGM1" });
    }
    let len = r.u32()? as usize;
    let config = decode_config(r.take(len)?)?;
    let count = r.u64()?;
    let count = usize::try_from(count).map_err(|_| IoError::Corrupt(format!("parameter count {count}")))?;
    let payload = r.take(count.checked_mul(4).ok_or_else(|| IoError::Corrupt("parameter count overflow".into()))?)?;
    let stored = r.u64()?;
    if r.remaining() != 0 {
        return Err(IoError::Corrupt("trailing bytes after checksum".into()));
    }
    let computed = fnv1a64(payload);
    if stored != computed {
        return Err(IoError::Checksum { stored, computed });
    }
    let values = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    Ok(ModelParams::from_values(config, values)?)
}

pub fn save_checkpoint(path: &Path, params: &ModelParams<f32>) -> Result<(), IoError> {
    write_file(path, encode_checkpoint(params))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams<f32>, IoError> {
    decode_checkpoint(&read_file(path)?)
}
