use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{check_range, AugmentError, SliceSample};

/// Adds zero-mean Gaussian noise of standard deviation `sigma` to every pixel
/// and clamps the result to `[0, 1]`.
pub fn additive_noise<R: Rng + ?Sized>(
    sample: &SliceSample,
    sigma: f64,
    rng: &mut R,
) -> Result<SliceSample, AugmentError> {
    check_range("sigma", sigma, 0.0, f64::MAX)?;
    if sigma == 0.0 {
        return Ok(sample.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("validated sigma");
    let image = sample.image.iter().map(|&v| (v as f64 + normal.sample(rng)).clamp(0.0, 1.0) as f32).collect();
    Ok(sample.with_image(image))
}

/// Multiplies the image by `factor` and clamps to `[0, 1]`.
pub fn intensity_scale(sample: &SliceSample, factor: f64) -> Result<SliceSample, AugmentError> {
    check_range("factor", factor, 0.5, 1.5)?;
    let f = factor as f32;
    Ok(sample.with_image(sample.image.iter().map(|&v| (v * f).clamp(0.0, 1.0)).collect()))
}
