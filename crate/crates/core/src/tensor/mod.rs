//! Minimal dense tensor engine with reverse-mode automatic differentiation.
//!
//! Only the primitives the segmentation network needs are provided: strided
//! convolution and transposed convolution, instance normalization, PReLU,
//! sigmoid, channel concatenation, addition, cropping, parameter views and the
//! binary soft Dice loss.

mod array;
mod gradcheck;
mod graph;
pub(crate) mod kernels;
mod scalar;

use thiserror::Error;

pub use array::Tensor;
pub use gradcheck::{grad_check, grad_check_probes, relative_error};
pub use graph::{Graph, Var};
pub use scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("invalid dims {0:?}: every extent must be positive")]
    InvalidDims(Vec<usize>),
    #[error("data length {len} does not match dims {dims:?}")]
    LengthMismatch { dims: Vec<usize>, len: usize },
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },
    #[error("{op}: expected {expected} input channels, got {got}")]
    ChannelMismatch { op: &'static str, expected: usize, got: usize },
    #[error("{op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("backward already ran on this graph")]
    BackwardTwice,
    #[error("backward needs a one-element output, got dims {0:?}")]
    NonScalarOutput(Vec<usize>),
    #[error("dice target must contain only 0 and 1")]
    NonBinaryTarget,
}

#[cfg(test)]
mod tests;
