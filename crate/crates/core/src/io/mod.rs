//! File formats, dataset layout, synthetic phantoms and report writers.

mod checkpoint;
mod container;
mod keyvalue;
mod manifest;
mod phantom;
mod report;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, fnv1a64, load_checkpoint, save_checkpoint};
pub use container::{
    decode_tensor, encode_tensor, read_image_stack, read_mask_stack, read_tensor, write_image_stack, write_mask_stack,
    write_tensor, TensorData,
};
pub use manifest::{read_lv_flags, write_lv_flags, Dataset, Group, Manifest, SliceOrder, MANIFEST_FILE};
pub use phantom::{generate_phantom, phantom_volume, Phantom, PhantomSpec};
pub use report::{curve_csv, curve_svg, summary_csv, write_report, ReportPaths};

use crate::model::ModelError;
use crate::stack::StackError;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("truncated data: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("corrupt data: {0}")]
    Corrupt(String),
    #[error("expected dtype {expected}, found {found}")]
    DtypeMismatch { expected: &'static str, found: &'static str },
    #[error("dims {0:?} overflow")]
    DimOverflow(Vec<u64>),
    #[error("checksum mismatch: stored {stored:016x}, computed {computed:016x}")]
    Checksum { stored: u64, computed: u64 },
    #[error("{path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("invalid manifest {path}: {msg}")]
    Manifest { path: PathBuf, msg: String },
    #[error("invalid phantom spec: {0}")]
    PhantomSpec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stack(#[from] StackError),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(io_err(path))
}

pub(crate) fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

pub(crate) fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(path, bytes).map_err(io_err(path))
}

/// Little-endian cursor over a byte buffer.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], IoError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(IoError::Truncated { need: self.pos.saturating_add(n), have: self.bytes.len() })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, IoError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, IoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64, IoError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64, IoError> {
        Ok(f64::from_bits(self.u64()?))
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}
