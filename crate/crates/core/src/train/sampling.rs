use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TrainError;
use crate::augment::{augment_pipeline, AugmentSpec, SliceSample};
use crate::tensor::Tensor;

/// Slot used for the index draws of an iteration.
const INDEX_SLOT: u64 = u64::MAX;

/// Independent generator for `(seed, iteration, slot)`.
pub fn substream(seed: u64, iteration: u64, slot: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&iteration.to_le_bytes());
    key[16..24].copy_from_slice(&slot.to_le_bytes());
    key[24..].copy_from_slice(b"minibtch");
    ChaCha8Rng::from_seed(key)
}

/// Network inputs and Dice targets, both `[B, 1, H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub images: Tensor<f32>,
    pub masks: Tensor<f32>,
}

/// Draws `batch_size` slices uniformly with replacement and passes each
/// through the augmentation pipeline with its own substream.
pub fn sample_minibatch(
    dataset: &[SliceSample],
    batch_size: usize,
    augment: &AugmentSpec,
    seed: u64,
    iteration: u64,
) -> Result<Batch, TrainError> {
    let first = dataset.first().ok_or(TrainError::EmptyDataset)?;
    let dims = (first.height(), first.width());
    if let Some(s) = dataset.iter().find(|s| (s.height(), s.width()) != dims) {
        return Err(TrainError::MixedDims(dims, (s.height(), s.width())));
    }
    let mut pick = substream(seed, iteration, INDEX_SLOT);
    let indices: Vec<usize> = (0..batch_size).map(|_| pick.random_range(0..dataset.len())).collect();
    let area = dims.0 * dims.1;
    let mut images = Vec::with_capacity(batch_size * area);
    let mut masks = Vec::with_capacity(batch_size * area);
    for (slot, &i) in indices.iter().enumerate() {
        let mut rng = substream(seed, iteration, slot as u64);
        let s = augment_pipeline(&dataset[i], augment, &mut rng)?;
        images.extend_from_slice(s.image());
        masks.extend(s.mask().iter().map(|&m| m as f32));
    }
    let shape = vec![batch_size, 1, dims.0, dims.1];
    Ok(Batch { indices, images: Tensor::new(shape.clone(), images)?, masks: Tensor::new(shape, masks)? })
}
