//! Dice loss, Adam and the mini-batch training loop.

mod adam;
mod sampling;

use thiserror::Error;

pub use adam::{adam_step, AdamState};
pub use sampling::{sample_minibatch, substream, Batch};

use crate::augment::{AugmentError, AugmentSpec, SliceSample};
use crate::model::{build_seganet, ModelConfig, ModelError, ModelParams};
use crate::numfmt::format_sig;
use crate::tensor::{Graph, Scalar, Tensor, TensorError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset slices differ in size: {0:?} vs {1:?}")]
    MixedDims((usize, usize), (usize, usize)),
    #[error("non-finite loss at iteration {0}")]
    NonFiniteLoss(usize),
    #[error("non-finite gradient at parameter {0}")]
    NonFiniteGradient(usize),
    #[error("parameter/gradient/state lengths differ")]
    LengthMismatch,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Seeds parameter initialization, sampling and augmentation.
    pub seed: u64,
    pub dice_smooth: f64,
    pub augment: AugmentSpec,
    /// Also checkpoint every this many iterations.
    pub checkpoint_every: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            batch_size: 8,
            learning_rate: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            dice_smooth: 1e-5,
            augment: AugmentSpec::default(),
            checkpoint_every: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if self.iterations == 0 || self.batch_size == 0 {
            return bad("iterations and batch size must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        for b in [self.adam_beta1, self.adam_beta2] {
            if !(b > 0.0 && b < 1.0) {
                return bad("Adam betas must lie in (0, 1)");
            }
        }
        if !(self.adam_epsilon > 0.0 && self.dice_smooth > 0.0) {
            return bad("epsilon and Dice smoothing must be positive");
        }
        if self.checkpoint_every == Some(0) {
            return bad("checkpoint interval must be positive");
        }
        self.augment.validate()?;
        Ok(())
    }
}

/// Mean binary soft Dice loss over the batch:
/// `1 - (2 sum(p g) + s) / (sum(p) + sum(g) + s)` per sample.
pub fn dice_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>, smooth: f64) -> Result<T, TensorError> {
    let mut g = Graph::new();
    let p = g.leaf(pred.clone(), false);
    let l = g.dice_loss(p, target, smooth)?;
    Ok(g.value(l).data()[0])
}

/// Per-iteration training loss.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossTrace {
    pub values: Vec<f64>,
}

impl LossTrace {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }

    /// Trailing moving average with the given window (shorter at the start).
    pub fn moving_average(&self, window: usize) -> Vec<f64> {
        let window = window.max(1);
        let mut sum = 0.0;
        (0..self.values.len())
            .map(|i| {
                sum += self.values[i];
                if i >= window {
                    sum -= self.values[i - window];
                }
                sum / (i + 1).min(window) as f64
            })
            .collect()
    }

    /// `iteration,loss` CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,loss\n");
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{i},{}\n", format_sig(*v, 6)));
        }
        s
    }
}

/// Trains a freshly initialized network on `dataset`. See
/// [`train_with_checkpoints`].
pub fn train(
    model: ModelConfig,
    config: &TrainConfig,
    dataset: &[SliceSample],
) -> Result<(ModelParams<f32>, LossTrace), TrainError> {
    train_with_checkpoints(model, config, dataset, |_, _| {})
}

/// Runs `sample -> augment -> forward -> Dice loss -> backward -> Adam` for
/// `config.iterations` steps. `checkpoint(iteration, params)` is called every
/// `checkpoint_every` completed iterations and once at the end.
pub fn train_with_checkpoints(
    model: ModelConfig,
    config: &TrainConfig,
    dataset: &[SliceSample],
    mut checkpoint: impl FnMut(usize, &ModelParams<f32>),
) -> Result<(ModelParams<f32>, LossTrace), TrainError> {
    config.validate()?;
    let (mut params, _) = build_seganet(model, config.seed)?;
    let mut state = AdamState::new(params.len());
    let mut trace = LossTrace::default();
    for it in 0..config.iterations {
        let batch = sample_minibatch(dataset, config.batch_size, &config.augment, config.seed, it as u64)?;
        let mut g = Graph::new();
        let p = params.leaf(&mut g, true);
        let y = params.forward_graph(&mut g, p, &batch.images)?;
        let loss = g.dice_loss(y, &batch.masks, config.dice_smooth)?;
        let value = g.value(loss).data()[0] as f64;
        if !value.is_finite() {
            return Err(TrainError::NonFiniteLoss(it));
        }
        g.backward(loss)?;
        let grad = g.grad(p).expect("parameters require gradients");
        adam_step(params.values_mut(), grad, &mut state, config)?;
        trace.values.push(value);
        let done = it + 1;
        if config.checkpoint_every.is_some_and(|k| done % k == 0 && done < config.iterations) {
            checkpoint(done, &params);
        }
    }
    checkpoint(config.iterations, &params);
    Ok((params, trace))
}
