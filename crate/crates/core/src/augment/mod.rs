//! Stochastic augmentations applied consistently to image/mask slice pairs.
//!
//! Six families are available: rigid transforms, crop-and-rotate, additive
//! noise, k-space line corruption, free-form deformation and intensity
//! scaling. [`augment_pipeline`] draws each family independently and applies
//! the enabled ones in that order.

mod intensity;
mod kspace;
mod warp;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use intensity::{additive_noise, intensity_scale};
pub use kspace::{fft2, ifft2, kspace_corrupt, kspace_corrupt_magnitude, KspaceMode};
pub use warp::{crop_rotate, displacement_field, ffd_deform, rigid_augment, ControlGrid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AugmentError {
    #[error("{param} = {value} is outside [{min}, {max}]")]
    OutOfRange { param: &'static str, value: f64, min: f64, max: f64 },
    #[error("crop window does not fit inside the image")]
    CropWindow,
    #[error("control grid of size {0} is too small for cubic B-splines (need at least 4)")]
    GridTooSmall(usize),
    #[error("control displacement {value} exceeds {limit} pixels")]
    DisplacementTooLarge { value: f64, limit: f64 },
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("invalid augmentation spec: {0}")]
    InvalidSpec(String),
}

fn check_range(param: &'static str, value: f64, min: f64, max: f64) -> Result<(), AugmentError> {
    if value.is_finite() && (min..=max).contains(&value) {
        Ok(())
    } else {
        Err(AugmentError::OutOfRange { param, value, min, max })
    }
}

/// One 2D slice: image in `[0, 1]`, binary mask and in-plane spacing
/// `[dx, dy]` in mm (column spacing first). Both arrays are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSample {
    height: usize,
    width: usize,
    image: Vec<f32>,
    mask: Vec<u8>,
    spacing: [f64; 2],
}

impl SliceSample {
    pub fn new(
        height: usize,
        width: usize,
        image: Vec<f32>,
        mask: Vec<u8>,
        spacing: [f64; 2],
    ) -> Result<Self, AugmentError> {
        let n = height * width;
        if n == 0 || image.len() != n || mask.len() != n {
            return Err(AugmentError::InvalidSample(format!(
                "{height}x{width} with {} image and {} mask values",
                image.len(),
                mask.len()
            )));
        }
        if !image.iter().all(|v| v.is_finite()) {
            return Err(AugmentError::InvalidSample("non-finite image value".into()));
        }
        if mask.iter().any(|&m| m > 1) {
            return Err(AugmentError::InvalidSample("mask is not binary".into()));
        }
        if !spacing.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(AugmentError::InvalidSample(format!("spacing {spacing:?}")));
        }
        Ok(Self { height, width, image, mask, spacing })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn image(&self) -> &[f32] {
        &self.image
    }

    pub fn mask(&self) -> &[u8] {
        &self.mask
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    fn with_image(&self, image: Vec<f32>) -> Self {
        Self { image, ..self.clone() }
    }
}

/// Probabilities and parameter ranges for [`augment_pipeline`].
///
/// `prob` holds the enable probability of each family in application order:
/// rigid, crop-rotate, noise, k-space, FFD, intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentSpec {
    pub prob: [f64; 6],
    /// Rotation angles are drawn from `[-rotation_deg, rotation_deg]`.
    pub rotation_deg: f64,
    /// Shifts are drawn from `[-translation, translation]` of each extent.
    pub translation: f64,
    /// Per-axis flip probability (horizontal, vertical).
    pub flip_prob: [f64; 2],
    pub crop_fraction: (f64, f64),
    pub noise_sigma: (f64, f64),
    pub kspace_lines: (f64, f64),
    pub ffd_grid: usize,
    /// Largest control displacement as a fraction of the image extent.
    pub ffd_max_displacement: f64,
    pub intensity_factor: (f64, f64),
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            prob: [0.5; 6],
            rotation_deg: 15.0,
            translation: 0.1,
            flip_prob: [0.5; 2],
            crop_fraction: (0.8, 1.0),
            noise_sigma: (0.0, 0.1),
            kspace_lines: (0.0, 0.1),
            ffd_grid: 5,
            ffd_max_displacement: 0.05,
            intensity_factor: (0.7, 1.3),
            seed: 0,
        }
    }
}

impl AugmentSpec {
    /// A spec with every family disabled.
    pub fn disabled() -> Self {
        Self { prob: [0.0; 6], ..Self::default() }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        let bad = |msg: String| Err(AugmentError::InvalidSpec(msg));
        for p in self.prob.iter().chain(&self.flip_prob) {
            if !(0.0..=1.0).contains(p) {
                return bad(format!("probability {p} outside [0, 1]"));
            }
        }
        if !(0.0..=180.0).contains(&self.rotation_deg) {
            return bad(format!("rotation range {}", self.rotation_deg));
        }
        if !(0.0..=1.0).contains(&self.translation) {
            return bad(format!("translation range {}", self.translation));
        }
        let ranges = [
            ("crop fraction", self.crop_fraction, 0.5, 1.0),
            ("noise sigma", self.noise_sigma, 0.0, f64::INFINITY),
            ("k-space line fraction", self.kspace_lines, 0.0, 0.2),
            ("intensity factor", self.intensity_factor, 0.5, 1.5),
        ];
        for (name, (lo, hi), min, max) in ranges {
            if !(lo.is_finite() && hi.is_finite() && min <= lo && lo <= hi && hi <= max) {
                return bad(format!("{name} range ({lo}, {hi}) not within [{min}, {max}]"));
            }
        }
        if self.ffd_grid < 4 {
            return Err(AugmentError::GridTooSmall(self.ffd_grid));
        }
        if !(0.0..=0.1).contains(&self.ffd_max_displacement) {
            return bad(format!("FFD displacement fraction {}", self.ffd_max_displacement));
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn symmetric<R: Rng + ?Sized>(rng: &mut R, r: f64) -> f64 {
    uniform(rng, (-r, r))
}

/// Applies each family with its probability, in fixed order, drawing
/// parameters uniformly from the ranges in `spec`. The result depends only on
/// the sample, the spec and the state of `rng`.
pub fn augment_pipeline<R: Rng + ?Sized>(
    sample: &SliceSample,
    spec: &AugmentSpec,
    rng: &mut R,
) -> Result<SliceSample, AugmentError> {
    spec.validate()?;
    let mut out = sample.clone();
    let mut enabled = [false; 6];
    for (e, &p) in enabled.iter_mut().zip(&spec.prob) {
        *e = rng.random_bool(p);
    }
    if enabled[0] {
        let angle = symmetric(rng, spec.rotation_deg);
        let shift = (symmetric(rng, spec.translation), symmetric(rng, spec.translation));
        let flips = (rng.random_bool(spec.flip_prob[0]), rng.random_bool(spec.flip_prob[1]));
        out = rigid_augment(&out, angle, shift, flips)?;
    }
    if enabled[1] {
        let fraction = uniform(rng, spec.crop_fraction);
        let angle = symmetric(rng, spec.rotation_deg);
        let origin = (rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0));
        out = crop_rotate(&out, fraction, angle, origin)?;
    }
    if enabled[2] {
        let sigma = uniform(rng, spec.noise_sigma);
        out = additive_noise(&out, sigma, rng)?;
    }
    if enabled[3] {
        let fraction = uniform(rng, spec.kspace_lines);
        let mode = if rng.random_bool(0.5) { KspaceMode::Zero } else { KspaceMode::Noise };
        out = kspace_corrupt(&out, fraction, mode, rng)?;
    }
    if enabled[4] {
        let g = spec.ffd_grid;
        let (lx, ly) = (spec.ffd_max_displacement * out.width as f64, spec.ffd_max_displacement * out.height as f64);
        let dx = (0..g * g).map(|_| symmetric(rng, lx)).collect();
        let dy = (0..g * g).map(|_| symmetric(rng, ly)).collect();
        out = ffd_deform(&out, &ControlGrid::new(g, dx, dy)?)?;
    }
    if enabled[5] {
        out = intensity_scale(&out, uniform(rng, spec.intensity_factor))?;
    }
    Ok(out)
}
