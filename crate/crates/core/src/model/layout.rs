use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ModelConfig, ModelError};
use crate::tensor::Scalar;

/// Variance gain of [`Init::PreNorm`] weights (He uses 2).
const PRE_NORM_GAIN: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Init {
    He {
        fan_in: usize,
    },
    /// Fan-in scaled normal for weights followed by instance normalization.
    /// The output is invariant to their scale, so the scale only sets the
    /// relative size of an Adam step; a smaller start lets training move faster.
    PreNorm {
        fan_in: usize,
    },
    Constant(f64),
}

/// One named parameter tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub dims: Vec<usize>,
    pub offset: usize,
    pub(crate) init: Init,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Offsets table partitioning the flat parameter vector, in canonical order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamLayout {
    entries: Vec<ParamEntry>,
    total: usize,
}

impl ParamLayout {
    pub(crate) fn push(&mut self, name: String, dims: Vec<usize>, init: Init) -> usize {
        let offset = self.total;
        let entry = ParamEntry { name, dims, offset, init };
        self.total += entry.len();
        self.entries.push(entry);
        self.entries.len() - 1
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn entry(&self, idx: usize) -> &ParamEntry {
        &self.entries[idx]
    }

    pub fn find(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub(crate) fn initialize(&self, seed: u64) -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(self.total);
        for e in &self.entries {
            match e.init {
                Init::He { fan_in } | Init::PreNorm { fan_in } => {
                    let gain = if matches!(e.init, Init::He { .. }) { 2.0 } else { PRE_NORM_GAIN };
                    let normal = Normal::new(0.0, (gain / fan_in as f64).sqrt()).expect("positive std");
                    values.extend((0..e.len()).map(|_| normal.sample(&mut rng) as f32));
                }
                Init::Constant(c) => values.extend(std::iter::repeat_n(c as f32, e.len())),
            }
        }
        values
    }
}

/// Flat parameter vector of a network together with its structure.
#[derive(Debug, Clone)]
pub struct ModelParams<T: Scalar = f32> {
    pub(crate) network: Arc<super::network::Network>,
    values: Vec<T>,
}

impl<T: Scalar> PartialEq for ModelParams<T> {
    fn eq(&self, other: &Self) -> bool {
        self.network.config == other.network.config && self.values == other.values
    }
}

impl<T: Scalar> ModelParams<T> {
    /// Wraps an existing parameter vector; its length must match the count
    /// derived from `config`.
    pub fn from_values(config: ModelConfig, values: Vec<T>) -> Result<Self, ModelError> {
        let network = Arc::new(super::network::Network::new(config)?);
        if values.len() != network.layout.total() {
            return Err(ModelError::ParamCount { expected: network.layout.total(), got: values.len() });
        }
        Ok(Self { network, values })
    }

    pub(crate) fn with_network(network: Arc<super::network::Network>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), network.layout.total());
        Self { network, values }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.network.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.network.layout
    }

    pub fn architecture(&self) -> &super::Architecture {
        &self.network.architecture
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Parameter tensor `name` as a slice of the flat vector.
    pub fn get(&self, name: &str) -> Option<&[T]> {
        self.layout().find(name).map(|e| &self.values[e.range()])
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams { network: self.network.clone(), values: self.values.iter().map(|v| U::of(v.as_f64())).collect() }
    }
}
