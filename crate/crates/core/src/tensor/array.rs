use std::ops::Range;

use super::{Scalar, TensorError};

/// Dense row-major array of real scalars.
///
/// Every extent is positive and `data.len()` always equals the product of
/// the extents. Gradients are not stored here; they live on the
/// [`Graph`](super::Graph) node that owns a tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    dims: Vec<usize>,
    data: Vec<T>,
}

pub(crate) fn checked_numel(dims: &[usize]) -> Result<usize, TensorError> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(TensorError::InvalidDims(dims.to_vec()));
    }
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| TensorError::InvalidDims(dims.to_vec()))
}

impl<T: Scalar> Tensor<T> {
    pub fn new(dims: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self, TensorError> {
        let dims = dims.into();
        let n = checked_numel(&dims)?;
        if n != data.len() {
            return Err(TensorError::LengthMismatch { dims, len: data.len() });
        }
        Ok(Self { dims, data })
    }

    pub fn full(dims: impl Into<Vec<usize>>, value: T) -> Result<Self, TensorError> {
        let dims = dims.into();
        let n = checked_numel(&dims)?;
        Ok(Self { dims, data: vec![value; n] })
    }

    pub fn zeros(dims: impl Into<Vec<usize>>) -> Result<Self, TensorError> {
        Self::full(dims, T::zero())
    }

    pub fn from_fn(dims: impl Into<Vec<usize>>, f: impl FnMut(usize) -> T) -> Result<Self, TensorError> {
        let dims = dims.into();
        let n = checked_numel(&dims)?;
        Ok(Self { dims, data: (0..n).map(f).collect() })
    }

    /// A one-element tensor with dims `[1]`.
    pub fn scalar(value: T) -> Self {
        Self { dims: vec![1], data: vec![value] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Validity check: false if any element is NaN or infinite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn reshape(self, dims: impl Into<Vec<usize>>) -> Result<Self, TensorError> {
        Self::new(dims, self.data)
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor { dims: self.dims.clone(), data: self.data.iter().map(|v| U::of(v.as_f64())).collect() }
    }

    /// Copies channels `range` (axis 1) of a tensor with rank >= 2.
    pub fn slice_channels(&self, range: Range<usize>) -> Result<Self, TensorError> {
        if self.rank() < 2 || range.start >= range.end || range.end > self.dims[1] {
            return Err(TensorError::InvalidArgument {
                op: "slice_channels",
                msg: format!("range {range:?} invalid for dims {:?}", self.dims),
            });
        }
        let batch = self.dims[0];
        let channels = self.dims[1];
        let inner: usize = self.dims[2..].iter().product();
        let mut data = Vec::with_capacity(batch * range.len() * inner);
        for b in 0..batch {
            let base = b * channels * inner;
            data.extend_from_slice(&self.data[base + range.start * inner..base + range.end * inner]);
        }
        let mut dims = self.dims.clone();
        dims[1] = range.len();
        Ok(Self { dims, data })
    }

    /// Element at `[b, c, h, w]` of a rank-4 tensor.
    pub fn at4(&self, b: usize, c: usize, h: usize, w: usize) -> T {
        let d = &self.dims;
        self.data[((b * d[1] + c) * d[2] + h) * d[3] + w]
    }

    pub fn max_abs_diff(&self, other: &Self) -> Option<T> {
        if self.dims != other.dims {
            return None;
        }
        Some(self.data.iter().zip(&other.data).map(|(a, b)| (*a - *b).abs()).fold(T::zero(), T::max))
    }
}
