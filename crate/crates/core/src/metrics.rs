//! Overlap and boundary-distance metrics between binary mask stacks.
//!
//! Distances are Euclidean in mm between boundary voxel centres. The nearest
//! neighbour search buckets points by slice and row and prunes with lower
//! bounds that never exceed the full distance expression, so results equal a
//! brute-force search exactly.

use thiserror::Error;

use crate::stack::{MaskStack, Spacing};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("mask dims differ: {0:?} vs {1:?}")]
    DimMismatch([usize; 3], [usize; 3]),
    #[error("mask spacings differ: {0:?} vs {1:?}")]
    SpacingMismatch(Spacing, Spacing),
    #[error("distance metric undefined for an empty mask")]
    EmptyMask,
}

fn check_dims(a: &MaskStack, b: &MaskStack) -> Result<(), MetricsError> {
    if a.dims() != b.dims() {
        return Err(MetricsError::DimMismatch(a.dims(), b.dims()));
    }
    Ok(())
}

/// `2 |A n B| / (|A| + |B|)`, or 1 when both masks are empty.
pub fn dice_coefficient(a: &MaskStack, b: &MaskStack) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    let (mut inter, mut total) = (0usize, 0usize);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        inter += (x & y) as usize;
        total += (x + y) as usize;
    }
    Ok(if total == 0 { 1.0 } else { 2.0 * inter as f64 / total as f64 })
}

/// Centres (x, y, z in mm) of foreground voxels with a background face
/// neighbour. In-plane positions outside the image count as background;
/// neighbours beyond the first or last slice are ignored.
pub fn boundary_points(mask: &MaskStack) -> Vec<[f64; 3]> {
    let [s, h, w] = mask.dims();
    let [dx, dy, dz] = mask.spacing();
    let data = mask.data();
    let at = |k: usize, r: usize, c: usize| data[(k * h + r) * w + c] == 1;
    let mut points = Vec::new();
    for k in 0..s {
        for r in 0..h {
            for c in 0..w {
                if !at(k, r, c) {
                    continue;
                }
                let edge = r == 0
                    || c == 0
                    || r + 1 == h
                    || c + 1 == w
                    || !at(k, r - 1, c)
                    || !at(k, r + 1, c)
                    || !at(k, r, c - 1)
                    || !at(k, r, c + 1)
                    || (k > 0 && !at(k - 1, r, c))
                    || (k + 1 < s && !at(k + 1, r, c));
                if edge {
                    points.push([c as f64 * dx, r as f64 * dy, k as f64 * dz]);
                }
            }
        }
    }
    points
}

/// Squared distance, evaluated in a fixed order shared with the bounds.
#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let (ex, ey, ez) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    ex * ex + ey * ey + ez * ez
}

/// Boundary points grouped into rows `(z, y, sorted x values)`.
struct RowIndex {
    rows: Vec<(f64, f64, Vec<f64>)>,
}

impl RowIndex {
    fn new(points: &[[f64; 3]]) -> Self {
        let mut rows: Vec<(f64, f64, Vec<f64>)> = Vec::new();
        // Points arrive in slice, row, column order.
        for p in points {
            match rows.last_mut() {
                Some((z, y, xs)) if *z == p[2] && *y == p[1] => xs.push(p[0]),
                _ => rows.push((p[2], p[1], vec![p[0]])),
            }
        }
        Self { rows }
    }

    /// Smallest squared distance from `q` to any indexed point.
    fn nearest2(&self, q: &[f64; 3]) -> f64 {
        let mut order: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, (z, y, _))| {
                let (ey, ez) = (q[1] - y, q[2] - z);
                (ey * ey + ez * ez, i)
            })
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best = f64::INFINITY;
        for (bound, i) in order {
            // Adding a non-negative x term can only keep or raise the sum.
            if bound >= best {
                break;
            }
            let (z, y, xs) = &self.rows[i];
            let split = xs.partition_point(|&x| x < q[0]);
            let mut scan = |x: f64| -> bool {
                let ex = q[0] - x;
                if ex * ex >= best {
                    return false;
                }
                best = best.min(dist2(q, &[x, *y, *z]));
                true
            };
            for &x in &xs[split..] {
                if !scan(x) {
                    break;
                }
            }
            for &x in xs[..split].iter().rev() {
                if !scan(x) {
                    break;
                }
            }
        }
        best
    }
}

/// Nearest-boundary distances from each point of `from` to `to`, in mm.
fn directed(from: &[[f64; 3]], to: &[[f64; 3]]) -> Vec<f64> {
    let index = RowIndex::new(to);
    from.iter().map(|q| index.nearest2(q).sqrt()).collect()
}

/// Both directed distance lists between the boundaries of `a` and `b`.
fn boundary_distances(a: &MaskStack, b: &MaskStack) -> Result<(Vec<f64>, Vec<f64>), MetricsError> {
    check_dims(a, b)?;
    let (pa, pb) = (boundary_points(a), boundary_points(b));
    if pa.is_empty() || pb.is_empty() {
        return Err(MetricsError::EmptyMask);
    }
    Ok((directed(&pa, &pb), directed(&pb, &pa)))
}

/// Symmetric Hausdorff distance between the boundaries, in mm.
pub fn hausdorff_distance(a: &MaskStack, b: &MaskStack) -> Result<f64, MetricsError> {
    let (ab, ba) = boundary_distances(a, b)?;
    Ok(ab.iter().chain(&ba).fold(0.0, |m, &d| m.max(d)))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Median of the pooled nearest-boundary distances in both directions, in mm.
pub fn median_contour_distance(a: &MaskStack, b: &MaskStack) -> Result<f64, MetricsError> {
    let (mut ab, ba) = boundary_distances(a, b)?;
    ab.extend(ba);
    Ok(median(ab))
}

/// Metrics restricted to one slice. Distances are `None` when either slice
/// is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceMetrics {
    pub slice: usize,
    pub dice: f64,
    pub hausdorff_mm: Option<f64>,
    pub mcd_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub dice: f64,
    /// `None` when either stack is empty.
    pub hausdorff_mm: Option<f64>,
    pub mcd_mm: Option<f64>,
    pub slices: Vec<SliceMetrics>,
}

fn distances(a: &MaskStack, b: &MaskStack) -> (Option<f64>, Option<f64>) {
    match boundary_distances(a, b) {
        Ok((mut ab, ba)) => {
            let hd = ab.iter().chain(&ba).fold(0.0, |m: f64, &d| m.max(d));
            ab.extend(ba);
            (Some(hd), Some(median(ab)))
        }
        Err(_) => (None, None),
    }
}

/// 3D metrics of `pred` against `gt` plus a per-slice 2D breakdown. Slices
/// where both masks are empty are left out of the breakdown.
pub fn compare_stacks(pred: &MaskStack, gt: &MaskStack) -> Result<MetricsReport, MetricsError> {
    check_dims(pred, gt)?;
    if pred.spacing() != gt.spacing() {
        return Err(MetricsError::SpacingMismatch(pred.spacing(), gt.spacing()));
    }
    let dice = dice_coefficient(pred, gt)?;
    let (hausdorff_mm, mcd_mm) = distances(pred, gt);
    let mut slices = Vec::new();
    for k in 0..pred.slices() {
        let (p, g) = (pred.extract_slice(k), gt.extract_slice(k));
        if p.is_empty() && g.is_empty() {
            continue;
        }
        let (hd, mcd) = distances(&p, &g);
        slices.push(SliceMetrics { slice: k, dice: dice_coefficient(&p, &g)?, hausdorff_mm: hd, mcd_mm: mcd });
    }
    Ok(MetricsReport { dice, hausdorff_mm, mcd_mm, slices })
}
