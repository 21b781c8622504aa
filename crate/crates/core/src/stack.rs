//! Multi-slice image and mask stacks with physical voxel spacing.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StackError {
    #[error("stack dims must be positive, got {0:?}")]
    InvalidDims([usize; 3]),
    #[error("expected {expected} voxels, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("spacing must be positive and finite, got {0:?}")]
    InvalidSpacing([f64; 3]),
    #[error("mask values must be 0 or 1")]
    NonBinary,
}

/// Voxel spacing in millimetres: `[dx, dy, dz]` where `dx` runs along
/// columns, `dy` along rows and `dz` is the slice thickness.
pub type Spacing = [f64; 3];

fn check(dims: [usize; 3], len: usize, spacing: Spacing) -> Result<(), StackError> {
    if dims.contains(&0) {
        return Err(StackError::InvalidDims(dims));
    }
    let expected = dims[0] * dims[1] * dims[2];
    if expected != len {
        return Err(StackError::LengthMismatch { expected, got: len });
    }
    if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(StackError::InvalidSpacing(spacing));
    }
    Ok(())
}

/// Intensity stack `[slices, height, width]`, slices ordered apex to base.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageStack {
    dims: [usize; 3],
    data: Vec<f32>,
    spacing: Spacing,
}

impl ImageStack {
    pub fn new(dims: [usize; 3], data: Vec<f32>, spacing: Spacing) -> Result<Self, StackError> {
        check(dims, data.len(), spacing)?;
        Ok(Self { dims, data, spacing })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }
    pub fn slices(&self) -> usize {
        self.dims[0]
    }
    pub fn height(&self) -> usize {
        self.dims[1]
    }
    pub fn width(&self) -> usize {
        self.dims[2]
    }
    pub fn spacing(&self) -> Spacing {
        self.spacing
    }
    pub fn data(&self) -> &[f32] {
        &self.data
    }
    pub fn slice(&self, s: usize) -> &[f32] {
        let n = self.dims[1] * self.dims[2];
        &self.data[s * n..(s + 1) * n]
    }
}

/// Binary mask stack `[slices, height, width]`, slices ordered apex to base.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskStack {
    dims: [usize; 3],
    data: Vec<u8>,
    spacing: Spacing,
}

impl MaskStack {
    pub fn new(dims: [usize; 3], data: Vec<u8>, spacing: Spacing) -> Result<Self, StackError> {
        check(dims, data.len(), spacing)?;
        if data.iter().any(|&v| v > 1) {
            return Err(StackError::NonBinary);
        }
        Ok(Self { dims, data, spacing })
    }

    pub fn empty(dims: [usize; 3], spacing: Spacing) -> Result<Self, StackError> {
        Self::new(dims, vec![0; dims.iter().product()], spacing)
    }

    /// Builds a mask from an indicator over `(slice, row, col)`.
    pub fn from_fn(
        dims: [usize; 3],
        spacing: Spacing,
        mut f: impl FnMut(usize, usize, usize) -> bool,
    ) -> Result<Self, StackError> {
        let mut data = Vec::with_capacity(dims.iter().product());
        for s in 0..dims[0] {
            for r in 0..dims[1] {
                for c in 0..dims[2] {
                    data.push(f(s, r, c) as u8);
                }
            }
        }
        Self::new(dims, data, spacing)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }
    pub fn slices(&self) -> usize {
        self.dims[0]
    }
    pub fn height(&self) -> usize {
        self.dims[1]
    }
    pub fn width(&self) -> usize {
        self.dims[2]
    }
    pub fn spacing(&self) -> Spacing {
        self.spacing
    }
    pub fn data(&self) -> &[u8] {
        &self.data
    }
    pub fn slice(&self, s: usize) -> &[u8] {
        let n = self.dims[1] * self.dims[2];
        &self.data[s * n..(s + 1) * n]
    }

    #[inline]
    pub fn get(&self, s: usize, r: usize, c: usize) -> bool {
        self.data[(s * self.dims[1] + r) * self.dims[2] + c] != 0
    }

    pub fn count(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Single-slice stack holding slice `s`.
    pub fn extract_slice(&self, s: usize) -> MaskStack {
        MaskStack { dims: [1, self.dims[1], self.dims[2]], data: self.slice(s).to_vec(), spacing: self.spacing }
    }

    /// Stack restricted to slices `range`.
    pub fn slice_range(&self, range: std::ops::Range<usize>) -> MaskStack {
        let n = self.dims[1] * self.dims[2];
        MaskStack {
            dims: [range.len(), self.dims[1], self.dims[2]],
            data: self.data[range.start * n..range.end * n].to_vec(),
            spacing: self.spacing,
        }
    }

    pub fn with_spacing(mut self, spacing: Spacing) -> Result<Self, StackError> {
        check(self.dims, self.data.len(), spacing)?;
        self.spacing = spacing;
        Ok(self)
    }
}
