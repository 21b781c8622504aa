//! Geometric augmentations. Each builds an inverse map from output pixel
//! coordinates to input coordinates, then samples the image bilinearly and
//! the mask with nearest-neighbour lookup.

use super::{check_range, AugmentError, SliceSample};

#[derive(Clone, Copy)]
enum Border {
    Zero,
    Clamp,
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

fn bilinear(img: &[f32], h: usize, w: usize, y: f64, x: f64, border: Border) -> f32 {
    let (y, x) = match border {
        Border::Clamp => (y.clamp(0.0, (h - 1) as f64), x.clamp(0.0, (w - 1) as f64)),
        Border::Zero => (y, x),
    };
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let at = |r: f64, c: f64| -> f64 {
        if r < 0.0 || c < 0.0 || r >= h as f64 || c >= w as f64 {
            0.0
        } else {
            img[r as usize * w + c as usize] as f64
        }
    };
    if fy == 0.0 && fx == 0.0 {
        return at(y0, x0) as f32;
    }
    let top = at(y0, x0) * (1.0 - fx) + at(y0, x0 + 1.0) * fx;
    let bottom = at(y0 + 1.0, x0) * (1.0 - fx) + at(y0 + 1.0, x0 + 1.0) * fx;
    (top * (1.0 - fy) + bottom * fy) as f32
}

fn nearest(mask: &[u8], h: usize, w: usize, y: f64, x: f64, border: Border) -> u8 {
    let (r, c) = (y.round(), x.round());
    let (r, c) = match border {
        Border::Clamp => (r.clamp(0.0, (h - 1) as f64), c.clamp(0.0, (w - 1) as f64)),
        Border::Zero => (r, c),
    };
    if r < 0.0 || c < 0.0 || r >= h as f64 || c >= w as f64 {
        0
    } else {
        mask[r as usize * w + c as usize]
    }
}

/// Resamples `sample` through `source`, which maps an output `(row, col)` to
/// input coordinates.
fn resample(sample: &SliceSample, border: Border, mut source: impl FnMut(usize, usize) -> (f64, f64)) -> SliceSample {
    let (h, w) = (sample.height, sample.width);
    let mut image = Vec::with_capacity(h * w);
    let mut mask = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let (y, x) = source(r, c);
            let (y, x) = (snap(y), snap(x));
            image.push(bilinear(&sample.image, h, w, y, x, border));
            mask.push(nearest(&sample.mask, h, w, y, x, border));
        }
    }
    SliceSample { image, mask, ..sample.clone() }
}

/// Rotation by `angle` degrees about the image centre, then a shift by
/// `shift = (rows, cols)` fractions of the image extent. `flips` mirrors
/// columns and rows respectively before rotating. Uncovered pixels are 0.
pub fn rigid_augment(
    sample: &SliceSample,
    angle: f64,
    shift: (f64, f64),
    flips: (bool, bool),
) -> Result<SliceSample, AugmentError> {
    check_range("angle", angle, -180.0, 180.0)?;
    check_range("shift.0", shift.0, -1.0, 1.0)?;
    check_range("shift.1", shift.1, -1.0, 1.0)?;
    let (h, w) = (sample.height as f64, sample.width as f64);
    let (cy, cx) = ((h - 1.0) / 2.0, (w - 1.0) / 2.0);
    let (ty, tx) = (shift.0 * h, shift.1 * w);
    let (sin, cos) = angle.to_radians().sin_cos();
    Ok(resample(sample, Border::Zero, |r, c| {
        let (dy, dx) = (r as f64 - ty - cy, c as f64 - tx - cx);
        let y = cos * dy - sin * dx + cy;
        let x = sin * dy + cos * dx + cx;
        let y = if flips.1 { 2.0 * cy - y } else { y };
        let x = if flips.0 { 2.0 * cx - x } else { x };
        (y, x)
    }))
}

/// Crops a window covering `crop_fraction` of each dimension, rotates it by
/// `angle` degrees about its centre and resizes it back to the original
/// dims. `origin` places the window: `(0, 0)` is the top-left corner and
/// `(1, 1)` the bottom-right. The in-plane spacing is scaled by
/// `crop_fraction`, since each output pixel now covers a smaller area.
pub fn crop_rotate(
    sample: &SliceSample,
    crop_fraction: f64,
    angle: f64,
    origin: (f64, f64),
) -> Result<SliceSample, AugmentError> {
    check_range("crop_fraction", crop_fraction, 0.5, 1.0)?;
    check_range("angle", angle, -180.0, 180.0)?;
    if !(0.0..=1.0).contains(&origin.0) || !(0.0..=1.0).contains(&origin.1) {
        return Err(AugmentError::CropWindow);
    }
    let (h, w) = (sample.height as f64, sample.width as f64);
    let (ch, cw) = ((crop_fraction * h).max(1.0), (crop_fraction * w).max(1.0));
    let (top, left) = (origin.0 * (h - ch), origin.1 * (w - cw));
    let (sy, sx) = (ch / h, cw / w);
    let (cy, cx) = ((ch - 1.0) / 2.0, (cw - 1.0) / 2.0);
    let (sin, cos) = angle.to_radians().sin_cos();
    let mut out = resample(sample, Border::Zero, |r, c| {
        let u = (r as f64 + 0.5) * sy - 0.5 - cy;
        let v = (c as f64 + 0.5) * sx - 0.5 - cx;
        (cos * u - sin * v + cy + top, sin * u + cos * v + cx + left)
    });
    out.spacing = [sample.spacing[0] * sx, sample.spacing[1] * sy];
    Ok(out)
}

/// `G x G` control point displacements in pixels, row-major with rows along
/// the image y axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGrid {
    size: usize,
    dy: Vec<f64>,
    dx: Vec<f64>,
}

impl ControlGrid {
    pub fn new(size: usize, dx: Vec<f64>, dy: Vec<f64>) -> Result<Self, AugmentError> {
        if size < 4 {
            return Err(AugmentError::GridTooSmall(size));
        }
        if dx.len() != size * size || dy.len() != size * size {
            return Err(AugmentError::InvalidSpec(format!("control grid {size}x{size} needs {} values", size * size)));
        }
        if !dx.iter().chain(&dy).all(|v| v.is_finite()) {
            return Err(AugmentError::InvalidSpec("non-finite control displacement".into()));
        }
        Ok(Self { size, dy, dx })
    }

    pub fn uniform(size: usize, dx: f64, dy: f64) -> Result<Self, AugmentError> {
        Self::new(size, vec![dx; size * size], vec![dy; size * size])
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn max_abs(&self) -> f64 {
        self.dx.iter().chain(&self.dy).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Distance in pixels between control points along an axis of `extent`.
    pub fn spacing(&self, extent: usize) -> f64 {
        (extent.max(2) - 1) as f64 / (self.size - 3) as f64
    }
}

fn bspline(t: f64) -> [f64; 4] {
    let s = 1.0 - t;
    [
        s * s * s / 6.0,
        (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0,
        (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0,
        t * t * t / 6.0,
    ]
}

/// First control index and basis weights for pixel coordinate `p`. Control
/// point `i` sits at `(i - 1) * delta`, so the grid covers `[0, extent - 1]`.
fn span(p: usize, delta: f64, size: usize) -> (usize, [f64; 4]) {
    let u = p as f64 / delta;
    let i = (u.floor() as usize).min(size - 4);
    (i, bspline(u - i as f64))
}

/// Dense `(dx, dy)` displacement field of an `h x w` image from the cubic
/// B-spline interpolation of `grid`.
pub fn displacement_field(grid: &ControlGrid, h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let g = grid.size;
    let (dr, dc) = (grid.spacing(h), grid.spacing(w));
    let cols: Vec<_> = (0..w).map(|c| span(c, dc, g)).collect();
    let mut fx = Vec::with_capacity(h * w);
    let mut fy = Vec::with_capacity(h * w);
    for r in 0..h {
        let (i, wr) = span(r, dr, g);
        for &(j, wc) in &cols {
            let (mut sx, mut sy) = (0.0, 0.0);
            for (a, br) in wr.iter().enumerate() {
                for (b, bc) in wc.iter().enumerate() {
                    let k = (i + a) * g + j + b;
                    sx += br * bc * grid.dx[k];
                    sy += br * bc * grid.dy[k];
                }
            }
            fx.push(sx);
            fy.push(sy);
        }
    }
    (fx, fy)
}

/// Free-form deformation: `out(p) = in(p - D(p))` where `D` is the B-spline
/// displacement field of `grid`. Sampling clamps to the image edge.
pub fn ffd_deform(sample: &SliceSample, grid: &ControlGrid) -> Result<SliceSample, AugmentError> {
    let limit = 0.1 * sample.height.max(sample.width) as f64;
    let worst = grid.max_abs();
    if worst > limit {
        return Err(AugmentError::DisplacementTooLarge { value: worst, limit });
    }
    let (fx, fy) = displacement_field(grid, sample.height, sample.width);
    let w = sample.width;
    Ok(resample(sample, Border::Clamp, |r, c| (r as f64 - fy[r * w + c], c as f64 - fx[r * w + c])))
}
