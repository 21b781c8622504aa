use super::ModelError;

/// Hyper-parameters of the residual U-Net.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Output channels of each encode layer; the last entry is the bottom
    /// connection. One stride-2 downsampling per entry except the last.
    pub encode_channels: Vec<usize>,
    pub input_channels: usize,
    pub output_channels: usize,
    pub kernel_size: usize,
    pub down_stride: usize,
    pub norm_epsilon: f64,
    /// Probability threshold for binarization (strict `>`).
    pub threshold: f64,
    pub prelu_init: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            encode_channels: vec![16, 32, 64, 128, 256],
            input_channels: 1,
            output_channels: 1,
            kernel_size: 3,
            down_stride: 2,
            norm_epsilon: 1e-5,
            threshold: 0.5,
            prelu_init: 0.25,
        }
    }
}

impl ModelConfig {
    /// Default config with different channel widths.
    pub fn with_channels(channels: &[usize]) -> Self {
        Self { encode_channels: channels.to_vec(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.encode_channels.len() < 2 {
            return bad("encode_channels needs at least two entries");
        }
        if self.encode_channels[0] == 0 || self.encode_channels.windows(2).any(|w| w[1] <= w[0]) {
            return bad("encode_channels must be positive and strictly increasing");
        }
        if self.input_channels == 0 || self.output_channels == 0 {
            return bad("channel counts must be positive");
        }
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return bad("kernel_size must be odd");
        }
        if self.down_stride != 2 {
            return bad("down_stride must be 2");
        }
        if !(self.norm_epsilon > 0.0 && self.norm_epsilon.is_finite()) {
            return bad("norm_epsilon must be positive");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        if !self.prelu_init.is_finite() {
            return bad("prelu_init must be finite");
        }
        Ok(())
    }

    pub fn downsamplings(&self) -> usize {
        self.encode_channels.len() - 1
    }

    /// Spatial extents must be multiples of this factor.
    pub fn size_factor(&self) -> usize {
        self.down_stride.pow(self.downsamplings() as u32)
    }

    /// Smallest admissible spatial dims that contain `(height, width)`: both
    /// multiples of the size factor, with at least two positions left at the
    /// bottom connection so instance normalization is defined there.
    pub fn padded_dims(&self, height: usize, width: usize) -> (usize, usize) {
        let f = self.size_factor();
        let mut h = height.div_ceil(f).max(1) * f;
        let w = width.div_ceil(f).max(1) * f;
        if (h / f) * (w / f) < 2 {
            h += f;
        }
        (h, w)
    }
}
