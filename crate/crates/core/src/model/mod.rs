//! Residual U-Net for slice-wise binary segmentation.
//!
//! The encode path is a stack of residual units, each downsampling by a
//! stride-2 convolution. A single residual unit forms the bottom connection.
//! Each decode level concatenates the matching encoder output, applies one
//! residual unit and upsamples with a stride-2 transposed convolution. A 1x1
//! convolution and a sigmoid produce the probability map.

mod config;
mod layout;
mod network;

use std::sync::Arc;

use thiserror::Error;

pub use config::ModelConfig;
pub use layout::{ModelParams, ParamEntry, ParamLayout};
pub use network::ResidualUnit;

use crate::stack::{ImageStack, MaskStack, StackError};
use crate::tensor::{Graph, Scalar, Tensor, TensorError, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("expected input [B, {expected_channels}, H, W], got {got:?}")]
    InputShape { expected_channels: usize, got: Vec<usize> },
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Stack(#[from] StackError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Encode,
    Bottom,
    Decode,
    Upsample,
    Head,
}

/// One stage of the layer graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub kind: BlockKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    /// Residual units inside the block (zero for upsampling and the head).
    pub residual_units: usize,
}

impl Block {
    fn new(name: String, kind: BlockKind, in_channels: usize, out_channels: usize, stride: usize) -> Self {
        let residual_units = matches!(kind, BlockKind::Encode | BlockKind::Bottom | BlockKind::Decode) as usize;
        Self { name, kind, in_channels, out_channels, stride, residual_units }
    }
}

/// Human-readable layer graph, in execution order.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub blocks: Vec<Block>,
}

impl Architecture {
    fn of_kind(&self, kind: BlockKind) -> impl Iterator<Item = &Block> {
        self.blocks.iter().filter(move |b| b.kind == kind)
    }

    /// Channel dims handed down the encode path, ending with the bottom.
    pub fn encode_channels(&self) -> Vec<usize> {
        self.of_kind(BlockKind::Encode).chain(self.of_kind(BlockKind::Bottom)).map(|b| b.out_channels).collect()
    }

    pub fn downsamplings(&self) -> usize {
        self.of_kind(BlockKind::Encode).filter(|b| b.stride == 2).count()
    }

    pub fn upsamplings(&self) -> usize {
        self.of_kind(BlockKind::Upsample).filter(|b| b.stride == 2).count()
    }

    pub fn bottom(&self) -> Option<&Block> {
        self.of_kind(BlockKind::Bottom).next()
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.blocks {
            writeln!(
                f,
                "{:<8} {:<9} {:>4} -> {:<4} stride {}",
                b.name,
                format!("{:?}", b.kind),
                b.in_channels,
                b.out_channels,
                b.stride
            )?;
        }
        Ok(())
    }
}

/// Builds the network for `config` and initializes its parameters from
/// `seed`: fan-in scaled normal convolution weights (He scaling, reduced for
/// convolutions that feed an instance norm), unit gains, zero shifts and
/// biases, constant PReLU slopes.
pub fn build_seganet(config: ModelConfig, seed: u64) -> Result<(ModelParams<f32>, Architecture), ModelError> {
    let network = Arc::new(network::Network::new(config)?);
    let values = network.layout.initialize(seed);
    let arch = network.architecture.clone();
    Ok((ModelParams::with_network(network, values), arch))
}

impl<T: Scalar> ModelParams<T> {
    /// Registers the flat parameter vector as a graph leaf.
    pub fn leaf(&self, g: &mut Graph<T>, requires_grad: bool) -> Var {
        let t = Tensor::new(vec![self.len()], self.values().to_vec()).expect("non-empty parameter vector");
        g.leaf(t, requires_grad)
    }

    /// Records the forward pass for `batch [B, Cin, H, W]` on `g`, reading the
    /// parameters from the flat vector node `params`. Inputs whose dims are
    /// not admissible are reflection-padded and the output cropped back.
    pub fn forward_graph(&self, g: &mut Graph<T>, params: Var, batch: &Tensor<T>) -> Result<Var, ModelError> {
        self.network.forward_any(g, params, batch)
    }

    pub fn residual_units(&self) -> Vec<&ResidualUnit> {
        self.network.residual_units().collect()
    }
}

/// Probability map `[B, Cout, H, W]` for `batch [B, Cin, H, W]`.
pub fn forward<T: Scalar>(params: &ModelParams<T>, batch: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
    let mut g = Graph::new();
    let p = params.leaf(&mut g, false);
    let y = params.forward_graph(&mut g, p, batch)?;
    Ok(g.value(y).clone())
}

const INFERENCE_BATCH: usize = 8;

/// Segments every slice of `stack` independently: a voxel is foreground iff
/// its probability is strictly greater than `threshold`. Spacing is carried
/// over unchanged.
pub fn segment_stack(params: &ModelParams<f32>, stack: &ImageStack, threshold: f64) -> Result<MaskStack, ModelError> {
    if params.config().input_channels != 1 || params.config().output_channels != 1 {
        return Err(ModelError::InvalidConfig("segment_stack needs a single-channel model".into()));
    }
    let [s, h, w] = stack.dims();
    let mut mask = Vec::with_capacity(s * h * w);
    let mut start = 0;
    while start < s {
        let end = (start + INFERENCE_BATCH).min(s);
        let data = stack.data()[start * h * w..end * h * w].to_vec();
        let batch = Tensor::new(vec![end - start, 1, h, w], data)?;
        let prob = forward(params, &batch)?;
        mask.extend(prob.data().iter().map(|&p| (p as f64 > threshold) as u8));
        start = end;
    }
    Ok(MaskStack::new([s, h, w], mask, stack.spacing())?)
}

#[cfg(test)]
mod tests;
