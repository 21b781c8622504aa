//! Atrial slice selection, volume-time curves, cycle landmarks, ejection
//! fractions and two-group statistics.

use std::ops::Range;

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::stack::MaskStack;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VolumetricsError {
    #[error("no slice contains ventricular tissue")]
    NoVentricle,
    #[error("ventricle reaches the top slice, leaving no atrial slices")]
    EmptyAtrialRange,
    #[error("{0} LV flags for {1} slices")]
    FlagCount(usize, usize),
    #[error("no phases given")]
    NoPhases,
    #[error("phase {0} differs in dims or spacing from phase 0")]
    InconsistentPhases(usize),
    #[error("landmark detection needs at least 8 phases, got {0}")]
    TooFewPhases(usize),
    #[error("smoothing window must be odd and positive, got {0}")]
    BadWindow(usize),
    #[error("no atrial kick detected")]
    NoAtrialKick,
    #[error("volume {0} must be positive")]
    NonPositiveVolume(f64),
    #[error("each group needs at least 2 values, got {0} and {1}")]
    GroupTooSmall(usize, usize),
    #[error("paired test needs equal group sizes, got {0} and {1}")]
    UnequalPairs(usize, usize),
    #[error("non-finite value in group data")]
    NonFinite,
}

/// Slices strictly above the highest slice flagged as ventricle. Slices are
/// indexed from the apex upwards; the first returned index is the most basal
/// atrial slice.
pub fn select_atrial_slices(lv_presence: &[bool]) -> Result<Range<usize>, VolumetricsError> {
    let top = lv_presence.iter().rposition(|&f| f).ok_or(VolumetricsError::NoVentricle)?;
    if top + 1 == lv_presence.len() {
        return Err(VolumetricsError::EmptyAtrialRange);
    }
    Ok(top + 1..lv_presence.len())
}

/// Foreground volume in mL.
pub fn mask_volume(mask: &MaskStack) -> f64 {
    let [dx, dy, dz] = mask.spacing();
    mask.count() as f64 * dx * dy * dz / 1000.0
}

/// Per-phase volumes in mL, treated as one cyclic period.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeCurve {
    pub volumes_ml: Vec<f64>,
    pub cycle_duration_ms: Option<f64>,
}

impl VolumeCurve {
    pub fn new(volumes_ml: Vec<f64>) -> Self {
        Self { volumes_ml, cycle_duration_ms: None }
    }

    pub fn phase_count(&self) -> usize {
        self.volumes_ml.len()
    }
}

/// One [`mask_volume`] per phase, in phase order.
pub fn volume_curve(phases: &[MaskStack]) -> Result<VolumeCurve, VolumetricsError> {
    let first = phases.first().ok_or(VolumetricsError::NoPhases)?;
    if let Some(i) = phases.iter().position(|m| m.dims() != first.dims() || m.spacing() != first.spacing()) {
        return Err(VolumetricsError::InconsistentPhases(i));
    }
    Ok(VolumeCurve::new(phases.iter().map(mask_volume).collect()))
}

/// Volume curve counting only the atrial slices selected from `lv_presence`.
pub fn atrial_volume_curve(phases: &[MaskStack], lv_presence: &[bool]) -> Result<VolumeCurve, VolumetricsError> {
    let first = phases.first().ok_or(VolumetricsError::NoPhases)?;
    if lv_presence.len() != first.slices() {
        return Err(VolumetricsError::FlagCount(lv_presence.len(), first.slices()));
    }
    let range = select_atrial_slices(lv_presence)?;
    let cropped: Vec<MaskStack> = phases.iter().map(|m| m.slice_range(range.clone())).collect();
    volume_curve(&cropped).map_err(|e| match e {
        VolumetricsError::InconsistentPhases(i) => VolumetricsError::InconsistentPhases(i),
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleLandmarks {
    pub max_phase: usize,
    pub min_phase: usize,
    pub prea_phase: usize,
    pub v_max_ml: f64,
    pub v_min_ml: f64,
    pub v_prea_ml: f64,
}

fn cyclic_smooth(v: &[f64], window: usize) -> Vec<f64> {
    if window == 1 {
        return v.to_vec();
    }
    let n = v.len() as isize;
    let half = (window / 2) as isize;
    (0..n).map(|i| (-half..=half).map(|k| v[(i + k).rem_euclid(n) as usize]).sum::<f64>() / window as f64).collect()
}

/// Maximum, minimum and pre-contraction landmarks of a cyclic curve.
///
/// Indices are detected on the curve smoothed by a centred cyclic moving
/// average of `smoothing_window` phases (1 disables smoothing); volumes are
/// read from the raw curve. The pre-contraction phase is the largest local
/// maximum strictly between the maximum and the minimum, moving forward
/// cyclically from the maximum.
pub fn find_landmarks(curve: &VolumeCurve, smoothing_window: usize) -> Result<CycleLandmarks, VolumetricsError> {
    let raw = &curve.volumes_ml;
    let n = raw.len();
    if n < 8 {
        return Err(VolumetricsError::TooFewPhases(n));
    }
    if smoothing_window.is_multiple_of(2) || smoothing_window > n {
        return Err(VolumetricsError::BadWindow(smoothing_window));
    }
    let s = cyclic_smooth(raw, smoothing_window);
    let first_extreme =
        |better: fn(f64, f64) -> bool| (1..n).fold(0, |best, i| if better(s[i], s[best]) { i } else { best });
    let max_phase = first_extreme(|a, b| a > b);
    let min_phase = first_extreme(|a, b| a < b);
    let is_peak = |i: usize| s[i] > s[(i + n - 1) % n] && s[i] >= s[(i + 1) % n];
    let mut prea: Option<usize> = None;
    let mut i = (max_phase + 1) % n;
    while i != min_phase && i != max_phase {
        if is_peak(i) && prea.is_none_or(|p| s[i] > s[p]) {
            prea = Some(i);
        }
        i = (i + 1) % n;
    }
    let prea_phase = prea.ok_or(VolumetricsError::NoAtrialKick)?;
    Ok(CycleLandmarks {
        max_phase,
        min_phase,
        prea_phase,
        v_max_ml: raw[max_phase],
        v_min_ml: raw[min_phase],
        v_prea_ml: raw[prea_phase],
    })
}

/// Total and active ejection fractions in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiomarkerResult {
    pub ef_percent: f64,
    pub aef_percent: f64,
}

/// `EF = (Vmax - Vmin) / Vmax` and `aEF = (VpreA - Vmin) / VpreA`, in percent.
pub fn ejection_fractions(l: &CycleLandmarks) -> Result<BiomarkerResult, VolumetricsError> {
    for v in [l.v_max_ml, l.v_prea_ml] {
        if !(v > 0.0) {
            return Err(VolumetricsError::NonPositiveVolume(v));
        }
    }
    Ok(BiomarkerResult {
        ef_percent: (l.v_max_ml - l.v_min_ml) / l.v_max_ml * 100.0,
        aef_percent: (l.v_prea_ml - l.v_min_ml) / l.v_prea_ml * 100.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
}

fn summarize(v: &[f64]) -> GroupSummary {
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    GroupSummary { n, mean, std: var.sqrt() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub a: GroupSummary,
    pub b: GroupSummary,
}

fn two_sided(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Ratio of a mean difference to its standard error, with the degenerate
/// zero-error cases mapped to 0 (equal means) or an infinite statistic.
fn ratio(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Two-sample t-test of `a` against `b`: Welch's unequal-variance test, or
/// the paired test on `a[i] - b[i]` when `paired` is set.
pub fn cohort_compare(a: &[f64], b: &[f64], paired: bool) -> Result<TTest, VolumetricsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(VolumetricsError::GroupTooSmall(a.len(), b.len()));
    }
    if !a.iter().chain(b).all(|v| v.is_finite()) {
        return Err(VolumetricsError::NonFinite);
    }
    let (sa, sb) = (summarize(a), summarize(b));
    if paired {
        if a.len() != b.len() {
            return Err(VolumetricsError::UnequalPairs(a.len(), b.len()));
        }
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let sd = summarize(&d);
        let df = (d.len() - 1) as f64;
        let t = ratio(sd.mean, sd.std / (d.len() as f64).sqrt());
        return Ok(TTest { t, df, p: two_sided(t, df), a: sa, b: sb });
    }
    let (qa, qb) = (sa.std.powi(2) / sa.n as f64, sb.std.powi(2) / sb.n as f64);
    let se = (qa + qb).sqrt();
    let df = if se > 0.0 {
        (qa + qb).powi(2) / (qa * qa / (sa.n - 1) as f64 + qb * qb / (sb.n - 1) as f64)
    } else {
        (sa.n + sb.n - 2) as f64
    };
    let t = ratio(sa.mean - sb.mean, se);
    Ok(TTest { t, df, p: two_sided(t, df), a: sa, b: sb })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bumps(n: usize, peaks: &[(f64, f64)], width: f64) -> Vec<f64> {
        (0..n)
            .map(|i| {
                peaks
                    .iter()
                    .map(|&(c, amp)| {
                        let d = (i as f64 - c).abs();
                        let d = d.min(n as f64 - d);
                        amp * (-d * d / (2.0 * width * width)).exp()
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn slice_selection() {
        let f = [true, true, true, false, false, false];
        assert_eq!(select_atrial_slices(&f).unwrap(), 3..6);
        assert_eq!(select_atrial_slices(&[false; 3]), Err(VolumetricsError::NoVentricle));
        assert_eq!(select_atrial_slices(&[true; 6]), Err(VolumetricsError::EmptyAtrialRange));
        assert_eq!(select_atrial_slices(&[false, true, false, true, false]).unwrap(), 4..5);
    }

    #[test]
    fn volumes() {
        let sp = [1.25, 1.25, 10.0];
        assert_eq!(mask_volume(&MaskStack::empty([2, 4, 4], sp).unwrap()), 0.0);
        let m = MaskStack::from_fn([10, 10, 10], sp, |_, _, _| true).unwrap();
        assert_eq!(mask_volume(&m), 15.625);
        let wide = m.clone().with_spacing([2.5, 2.5, 10.0]).unwrap();
        assert_eq!(mask_volume(&wide), 4.0 * mask_volume(&m));
        let a = MaskStack::from_fn([2, 4, 4], sp, |s, _, _| s == 0).unwrap();
        let b = MaskStack::from_fn([2, 4, 4], sp, |s, r, _| s == 1 && r < 2).unwrap();
        let u = MaskStack::from_fn([2, 4, 4], sp, |s, r, _| s == 0 || r < 2).unwrap();
        assert_eq!(mask_volume(&u), mask_volume(&a) + mask_volume(&b));
    }

    #[test]
    fn curves() {
        let sp = [1.0; 3];
        let m = MaskStack::from_fn([3, 4, 4], sp, |s, _, _| s > 0).unwrap();
        let c = volume_curve(&[m.clone(), m.clone(), m.clone()]).unwrap();
        assert_eq!(c.volumes_ml, vec![0.032; 3]);
        assert_eq!(volume_curve(&[]), Err(VolumetricsError::NoPhases));
        let other = MaskStack::empty([3, 4, 5], sp).unwrap();
        assert_eq!(volume_curve(&[m.clone(), other]), Err(VolumetricsError::InconsistentPhases(1)));
        let atrial = atrial_volume_curve(std::slice::from_ref(&m), &[true, false, false]).unwrap();
        assert_eq!(atrial.volumes_ml, vec![0.032]);
        let lv_low = atrial_volume_curve(std::slice::from_ref(&m), &[false, true, false]).unwrap();
        assert_eq!(lv_low.volumes_ml, vec![0.016]);
        assert_eq!(atrial_volume_curve(&[m], &[true]), Err(VolumetricsError::FlagCount(1, 3)));
        let single = volume_curve(&[MaskStack::empty([1, 1, 1], sp).unwrap()]).unwrap();
        assert_eq!(find_landmarks(&single, 1), Err(VolumetricsError::TooFewPhases(1)));
    }

    #[test]
    fn landmark_example() {
        let curve = VolumeCurve::new(bumps(30, &[(12.0, 1.0), (24.0, 0.4), (0.0, -0.2)], 2.0));
        let l = find_landmarks(&curve, 1).unwrap();
        assert_eq!((l.max_phase, l.min_phase, l.prea_phase), (12, 0, 24));
        assert_eq!(l.v_max_ml, curve.volumes_ml[12]);
        let l3 = find_landmarks(&curve, 3).unwrap();
        assert_eq!((l3.max_phase, l3.prea_phase), (12, 24));
        assert_eq!(l3.v_prea_ml, curve.volumes_ml[24]);
    }

    #[test]
    fn landmarks_rotate_with_curve() {
        let base = bumps(25, &[(5.0, 40.0), (15.0, 25.0)], 2.5).iter().map(|v| v + 60.0).collect::<Vec<_>>();
        let l = find_landmarks(&VolumeCurve::new(base.clone()), 1).unwrap();
        for shift in 1..25 {
            let mut rotated = base.clone();
            rotated.rotate_right(shift);
            let r = find_landmarks(&VolumeCurve::new(rotated), 1).unwrap();
            assert_eq!(r.max_phase, (l.max_phase + shift) % 25);
            assert_eq!(r.min_phase, (l.min_phase + shift) % 25);
            assert_eq!(r.prea_phase, (l.prea_phase + shift) % 25);
            assert_eq!((r.v_max_ml, r.v_min_ml, r.v_prea_ml), (l.v_max_ml, l.v_min_ml, l.v_prea_ml));
        }
    }

    #[test]
    fn sawtooth_has_no_kick() {
        let saw = VolumeCurve::new((0..20).map(|i| i as f64).collect());
        assert_eq!(find_landmarks(&saw, 1), Err(VolumetricsError::NoAtrialKick));
        assert_eq!(find_landmarks(&saw, 4), Err(VolumetricsError::BadWindow(4)));
    }

    #[test]
    fn ejection_fraction_arithmetic() {
        let l = |max: f64, min: f64, prea: f64| CycleLandmarks {
            max_phase: 0,
            min_phase: 1,
            prea_phase: 2,
            v_max_ml: max,
            v_min_ml: min,
            v_prea_ml: prea,
        };
        let r = ejection_fractions(&l(111.0, 79.40, 103.40)).unwrap();
        assert!((r.ef_percent - 28.468).abs() < 1e-3);
        let healthy = ejection_fractions(&l(50.0, 22.43, 35.47)).unwrap();
        assert!((healthy.aef_percent - 36.763).abs() < 1e-3);
        let flat = ejection_fractions(&l(5.0, 5.0, 5.0)).unwrap();
        assert_eq!((flat.ef_percent, flat.aef_percent), (0.0, 0.0));
        let scaled = ejection_fractions(&l(111.0 * 3.7, 79.40 * 3.7, 103.40 * 3.7)).unwrap();
        assert!((scaled.ef_percent - r.ef_percent).abs() < 1e-12);
        assert_eq!(ejection_fractions(&l(0.0, 0.0, 1.0)), Err(VolumetricsError::NonPositiveVolume(0.0)));
    }

    #[test]
    fn t_test_edge_cases() {
        let g = [1.0, 2.0, 3.0];
        let welch = cohort_compare(&g, &g, false).unwrap();
        assert_eq!((welch.t, welch.p), (0.0, 1.0));
        let paired = cohort_compare(&g, &g, true).unwrap();
        assert_eq!((paired.t, paired.p), (0.0, 1.0));
        assert_eq!(cohort_compare(&g, &[1.0, 2.0], true), Err(VolumetricsError::UnequalPairs(3, 2)));
        assert_eq!(cohort_compare(&g, &[1.0], false), Err(VolumetricsError::GroupTooSmall(3, 1)));
        let shifted = cohort_compare(&[1.0, 1.0], &[2.0, 2.0], false).unwrap();
        assert_eq!((shifted.t, shifted.p), (f64::NEG_INFINITY, 0.0));
    }

    #[test]
    fn welch_hand_computed() {
        let a = [27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6, 23.1, 19.6, 19.0, 21.7, 21.4];
        let b = [27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2, 21.9, 22.1, 22.9, 20.5, 24.4];
        let r = cohort_compare(&a, &b, false).unwrap();
        let (ma, mb) = (a.iter().sum::<f64>() / 15.0, b.iter().sum::<f64>() / 15.0);
        let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / 14.0;
        let vb = b.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / 14.0;
        let se = (va / 15.0 + vb / 15.0).sqrt();
        assert!((r.t - (ma - mb) / se).abs() < 1e-12);
        assert!((r.t + 2.46).abs() < 0.01);
        assert!((r.df - 24.988).abs() < 0.01);
        assert!((r.p - 0.021).abs() < 0.001);
    }
}
