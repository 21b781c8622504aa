use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{check_range, AugmentError, SliceSample};

/// How corrupted k-space lines are replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KspaceMode {
    Zero,
    /// Complex Gaussian noise with the RMS magnitude of the non-DC rows.
    Noise,
}

fn transform(data: &mut [Complex<f64>], h: usize, w: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    row.process(data);
    let mut column = vec![Complex::default(); h];
    for c in 0..w {
        for r in 0..h {
            column[r] = data[r * w + c];
        }
        col.process(&mut column);
        for r in 0..h {
            data[r * w + c] = column[r];
        }
    }
}

/// Unnormalized 2D DFT of a real `h x w` row-major image.
pub fn fft2(image: &[f32], h: usize, w: usize) -> Vec<Complex<f64>> {
    assert_eq!(image.len(), h * w, "image length");
    let mut data: Vec<Complex<f64>> = image.iter().map(|&v| Complex::new(v as f64, 0.0)).collect();
    transform(&mut data, h, w, false);
    data
}

/// Inverse of [`fft2`], including the `1 / (h w)` normalization.
pub fn ifft2(spectrum: &[Complex<f64>], h: usize, w: usize) -> Vec<Complex<f64>> {
    assert_eq!(spectrum.len(), h * w, "spectrum length");
    let mut data = spectrum.to_vec();
    transform(&mut data, h, w, true);
    let scale = 1.0 / (h * w) as f64;
    data.iter_mut().for_each(|v| *v *= scale);
    data
}

/// Replaces `lines` distinct rows of `k`, drawn from `1..h`, according to `mode`.
pub(super) fn corrupt_rows<R: Rng + ?Sized>(
    k: &mut [Complex<f64>],
    h: usize,
    w: usize,
    lines: usize,
    mode: KspaceMode,
    rng: &mut R,
) {
    if lines == 0 {
        return;
    }
    let rows = rand::seq::index::sample(rng, h - 1, lines);
    match mode {
        KspaceMode::Zero => {
            for r in rows.iter() {
                k[(r + 1) * w..(r + 2) * w].fill(Complex::default());
            }
        }
        KspaceMode::Noise => {
            let energy: f64 = k[w..].iter().map(|v| v.norm_sqr()).sum();
            let rms = (energy / (k.len() - w) as f64).sqrt();
            let normal = Normal::new(0.0, rms / std::f64::consts::SQRT_2).expect("finite rms");
            for r in rows.iter() {
                for v in &mut k[(r + 1) * w..(r + 2) * w] {
                    *v = Complex::new(normal.sample(rng), normal.sample(rng));
                }
            }
        }
    }
}

/// Corrupts `round(line_fraction * H)` randomly chosen k-space rows (never
/// row 0, which holds DC) and returns the magnitude image before any
/// renormalization.
pub fn kspace_corrupt_magnitude<R: Rng + ?Sized>(
    sample: &SliceSample,
    line_fraction: f64,
    mode: KspaceMode,
    rng: &mut R,
) -> Result<Vec<f64>, AugmentError> {
    check_range("line_fraction", line_fraction, 0.0, 0.2)?;
    let (h, w) = (sample.height, sample.width);
    let mut k = fft2(&sample.image, h, w);
    let lines = ((line_fraction * h as f64).round() as usize).min(h.saturating_sub(1));
    corrupt_rows(&mut k, h, w, lines, mode, rng);
    Ok(ifft2(&k, h, w).iter().map(|v| v.norm()).collect())
}

/// k-space line corruption. The magnitude image is rescaled so its maximum
/// matches the input maximum and clamped to `[0, 1]`; the mask is untouched.
pub fn kspace_corrupt<R: Rng + ?Sized>(
    sample: &SliceSample,
    line_fraction: f64,
    mode: KspaceMode,
    rng: &mut R,
) -> Result<SliceSample, AugmentError> {
    let magnitude = kspace_corrupt_magnitude(sample, line_fraction, mode, rng)?;
    let in_max = sample.image.iter().fold(0.0f64, |m, &v| m.max(v as f64));
    let out_max = magnitude.iter().fold(0.0f64, |m, &v| m.max(v));
    let scale = if out_max > 0.0 { in_max / out_max } else { 0.0 };
    Ok(sample.with_image(magnitude.iter().map(|&v| (v * scale).clamp(0.0, 1.0) as f32).collect()))
}
