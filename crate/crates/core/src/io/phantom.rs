//! Synthetic LA/LV phantom with an analytic volume-time curve.
//!
//! The LA is an axis-aligned ellipsoid whose volume at phase `p` is
//! `base + a1 g1(p) + a2 g2(p)`, where `g1`, `g2` are unit-height cyclic
//! Gaussian bumps centred on the maximum and pre-contraction phases. The
//! three coefficients are solved so the curve takes exactly the requested
//! maximum, pre-contraction and minimum volumes. A fixed LV ellipsoid sits
//! below the LA so the atrial slice selection has something to find.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::keyvalue;
use super::manifest::{Dataset, Group, Manifest};
use super::{read_text, write_file, IoError};
use crate::numfmt::format_sig;
use crate::stack::{ImageStack, MaskStack, Spacing};
use crate::volumetrics::{ejection_fractions, CycleLandmarks};

/// LA semi-axes relative to the in-plane x semi-axis.
const LA_ASPECT: [f64; 3] = [1.0, 0.9, 1.25];
/// LV semi-axes in mm.
const LV_AXES: [f64; 3] = [22.0, 20.0, 18.0];

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub v_max: f64,
    pub v_min: f64,
    pub v_prea: f64,
    pub phases: usize,
    /// `[slices, rows, cols]`.
    pub grid: [usize; 3],
    pub spacing: Spacing,
    pub max_phase: usize,
    pub prea_phase: usize,
    /// Standard deviation of the bumps, in phases.
    pub peak_width: f64,
    /// Standard deviation of the additive image noise.
    pub noise: f64,
    pub seed: u64,
    pub group: Group,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            v_max: 110.0,
            v_min: 80.0,
            v_prea: 103.0,
            phases: 30,
            grid: [48, 64, 64],
            spacing: [1.25, 1.25, 2.5],
            max_phase: 12,
            prea_phase: 24,
            peak_width: 3.0,
            noise: 0.02,
            seed: 0,
            group: Group::Patient,
        }
    }
}

impl PhantomSpec {
    /// The default phantom sampled with 10 mm slices.
    pub fn coarse() -> Self {
        Self { grid: [13, 64, 64], spacing: [1.25, 1.25, 10.0], ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), IoError> {
        let bad = |m: String| Err(IoError::PhantomSpec(m));
        if !(self.v_min > 0.0 && self.v_min < self.v_prea && self.v_prea < self.v_max && self.v_max.is_finite()) {
            return bad(format!("need 0 < v_min < v_prea < v_max, got {} {} {}", self.v_min, self.v_prea, self.v_max));
        }
        if self.phases < 8 {
            return bad(format!("need at least 8 phases, got {}", self.phases));
        }
        if self.max_phase >= self.phases || self.prea_phase >= self.phases || self.max_phase == self.prea_phase {
            return bad("peak phases must be distinct and within the cycle".into());
        }
        if !(self.peak_width > 0.0 && self.peak_width.is_finite()) || !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("peak width must be positive and noise non-negative".into());
        }
        if self.grid.contains(&0) || self.spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad("grid and spacing must be positive".into());
        }
        Ok(())
    }

    /// Parses a `key = value` spec; absent keys keep their defaults.
    pub fn parse(text: &str, path: &Path) -> Result<Self, IoError> {
        let mut s = Self::default();
        for e in keyvalue::parse(text, path)? {
            match e.key.as_str() {
                "v_max" => s.v_max = keyvalue::value(&e, path)?,
                "v_min" => s.v_min = keyvalue::value(&e, path)?,
                "v_prea" => s.v_prea = keyvalue::value(&e, path)?,
                "phases" => s.phases = keyvalue::value(&e, path)?,
                "grid" => s.grid = keyvalue::values(&e, path)?,
                "spacing" => s.spacing = keyvalue::values(&e, path)?,
                "max_phase" => s.max_phase = keyvalue::value(&e, path)?,
                "prea_phase" => s.prea_phase = keyvalue::value(&e, path)?,
                "peak_width" => s.peak_width = keyvalue::value(&e, path)?,
                "noise" => s.noise = keyvalue::value(&e, path)?,
                "seed" => s.seed = keyvalue::value(&e, path)?,
                "group" => {
                    s.group = match e.value.as_str() {
                        "patient" => Group::Patient,
                        "volunteer" => Group::Volunteer,
                        other => return Err(IoError::PhantomSpec(format!("unknown group {other:?}"))),
                    }
                }
                other => return Err(IoError::PhantomSpec(format!("unknown key {other:?}"))),
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        Self::parse(&read_text(path)?, path)
    }

    fn bump(&self, p: usize, centre: usize) -> f64 {
        let d = (p as f64 - centre as f64).abs();
        let d = d.min(self.phases as f64 - d);
        (-d * d / (2.0 * self.peak_width * self.peak_width)).exp()
    }
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(m);
    if d.abs() < 1e-12 {
        return None;
    }
    let mut x = [0.0; 3];
    for (j, xj) in x.iter_mut().enumerate() {
        let mut mj = m;
        for i in 0..3 {
            mj[i][j] = b[i];
        }
        *xj = det(mj) / d;
    }
    Some(x)
}

/// Analytic LA volume per phase and its landmarks.
pub fn phantom_volume(spec: &PhantomSpec) -> Result<(Vec<f64>, CycleLandmarks), IoError> {
    spec.validate()?;
    let n = spec.phases;
    let (c1, c2) = (spec.max_phase, spec.prea_phase);
    let g1: Vec<f64> = (0..n).map(|p| spec.bump(p, c1)).collect();
    let g2: Vec<f64> = (0..n).map(|p| spec.bump(p, c2)).collect();
    let argmin = |v: &[f64]| (1..n).fold(0, |b, i| if v[i] < v[b] { i } else { b });
    let mut pmin = argmin(&g1.iter().zip(&g2).map(|(a, b)| a + b).collect::<Vec<_>>());
    let unsolvable = || IoError::PhantomSpec("peak phases do not admit a two-peak curve".into());
    for _ in 0..50 {
        let x = solve3(
            [[1.0, 1.0, g2[c1]], [1.0, g1[c2], 1.0], [1.0, g1[pmin], g2[pmin]]],
            [spec.v_max, spec.v_prea, spec.v_min],
        )
        .ok_or_else(unsolvable)?;
        let v: Vec<f64> = (0..n).map(|p| x[0] + x[1] * g1[p] + x[2] * g2[p]).collect();
        let next = argmin(&v);
        if next == pmin || v[next] == v[pmin] {
            let l = CycleLandmarks {
                max_phase: c1,
                min_phase: pmin,
                prea_phase: c2,
                v_max_ml: spec.v_max,
                v_min_ml: spec.v_min,
                v_prea_ml: spec.v_prea,
            };
            let detected = crate::volumetrics::find_landmarks(&crate::volumetrics::VolumeCurve::new(v.clone()), 1)
                .map_err(|_| unsolvable())?;
            if (detected.max_phase, detected.prea_phase, detected.min_phase) != (c1, c2, pmin) {
                return Err(unsolvable());
            }
            return Ok((v, l));
        }
        pmin = next;
    }
    Err(unsolvable())
}

/// Generated phantom: one image and LA mask stack per phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub spec: PhantomSpec,
    pub images: Vec<ImageStack>,
    pub masks: Vec<MaskStack>,
    pub lv_flags: Vec<bool>,
    /// Analytic LA volume per phase, mL.
    pub volumes_ml: Vec<f64>,
    pub landmarks: CycleLandmarks,
}

/// Squared normalized radius of voxel centre `p` for an ellipsoid.
fn quad(p: [f64; 3], centre: [f64; 3], axes: [f64; 3]) -> f64 {
    (0..3).map(|i| ((p[i] - centre[i]) / axes[i]).powi(2)).sum()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom, IoError> {
    let (volumes_ml, landmarks) = phantom_volume(spec)?;
    let [s, h, w] = spec.grid;
    let [dx, dy, dz] = spec.spacing;
    let la_axes = |v_ml: f64| {
        let a = (3.0 * v_ml * 1000.0 / (4.0 * std::f64::consts::PI * LA_ASPECT.iter().product::<f64>())).cbrt();
        LA_ASPECT.map(|r| r * a)
    };
    let largest = la_axes(spec.v_max);
    let extent = [(w - 1) as f64 * dx, (h - 1) as f64 * dy, (s - 1) as f64 * dz];
    let too_big = |what: &str| IoError::PhantomSpec(format!("{what} ellipsoid exceeds the grid"));

    // Off-lattice centres avoid symmetric voxelization artefacts.
    let (cx, cy) = (extent[0] / 2.0 + 0.37 * dx, extent[1] / 2.0 - 0.21 * dy);
    let lv_centre = [cx, cy, dz / 2.0 + LV_AXES[2] + 0.13 * dz];
    let lv_top = ((lv_centre[2] + LV_AXES[2]) / dz).floor() as usize;
    let la_centre = [cx, cy, lv_top as f64 * dz + largest[2] + 0.5 * dz];
    for (c, axes, name) in [(lv_centre, LV_AXES, "LV"), (la_centre, largest, "LA")] {
        if (0..3).any(|i| c[i] - axes[i] < 0.0 || c[i] + axes[i] > extent[i]) {
            return Err(too_big(name));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = (spec.noise > 0.0).then(|| Normal::new(0.0, spec.noise).expect("valid noise"));
    let mut lv_flags = vec![false; s];
    let mut images = Vec::with_capacity(spec.phases);
    let mut masks = Vec::with_capacity(spec.phases);
    for &v in &volumes_ml {
        let axes = la_axes(v);
        let mut img = Vec::with_capacity(s * h * w);
        let mut mask = Vec::with_capacity(s * h * w);
        for k in 0..s {
            for r in 0..h {
                for c in 0..w {
                    let p = [c as f64 * dx, r as f64 * dy, k as f64 * dz];
                    let (qa, qv) = (quad(p, la_centre, axes), quad(p, lv_centre, LV_AXES));
                    mask.push((qa <= 1.0) as u8);
                    if qv <= 1.0 {
                        lv_flags[k] = true;
                    }
                    let blood = sigmoid((1.0 - qa.sqrt()) * 12.0).max(sigmoid((1.0 - qv.sqrt()) * 12.0));
                    let texture = 0.04
                        * (0.31 * c as f64 + 0.17 * r as f64).sin()
                        * (0.23 * r as f64 - 0.11 * c as f64 + 0.5 * k as f64).cos();
                    let n = noise.as_ref().map_or(0.0, |d| d.sample(&mut rng));
                    img.push((0.15 + 0.6 * blood + texture + n).clamp(0.0, 1.0) as f32);
                }
            }
        }
        images.push(ImageStack::new(spec.grid, img, spec.spacing)?);
        masks.push(MaskStack::new(spec.grid, mask, spec.spacing)?);
    }
    Ok(Phantom { spec: spec.clone(), images, masks, lv_flags, volumes_ml, landmarks })
}

impl Phantom {
    /// Dataset with images and masks for every phase.
    pub fn dataset(&self, subject: &str) -> Dataset {
        let mut manifest = Manifest::new(self.spec.spacing, self.spec.phases, self.spec.grid[0]);
        manifest.subject = Some(subject.to_string());
        manifest.group = Some(self.spec.group);
        Dataset {
            manifest,
            images: self.images.iter().cloned().enumerate().collect(),
            masks: self.masks.iter().cloned().enumerate().collect(),
            lv_flags: Some(self.lv_flags.clone()),
        }
    }

    /// `key = value` record of the analytic landmarks and ejection fractions.
    pub fn landmark_record(&self) -> String {
        let l = &self.landmarks;
        let b = ejection_fractions(l).expect("positive phantom volumes");
        let mut s = String::new();
        for (k, v) in [("max_phase", l.max_phase), ("min_phase", l.min_phase), ("prea_phase", l.prea_phase)] {
            writeln!(s, "{k} = {v}").unwrap();
        }
        for (k, v) in [
            ("v_max_ml", l.v_max_ml),
            ("v_min_ml", l.v_min_ml),
            ("v_prea_ml", l.v_prea_ml),
            ("ef_percent", b.ef_percent),
            ("aef_percent", b.aef_percent),
        ] {
            writeln!(s, "{k} = {}", format_sig(v, 6)).unwrap();
        }
        s
    }

    /// Writes the dataset plus `landmarks.txt` and `volumes.csv` to `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, IoError> {
        let subject = dir.file_name().map_or("phantom".into(), |n| n.to_string_lossy().into_owned());
        self.dataset(&subject).save(dir)?;
        let record = dir.join("landmarks.txt");
        write_file(&record, self.landmark_record())?;
        let mut csv = String::from("phase,volume_ml\n");
        for (p, v) in self.volumes_ml.iter().enumerate() {
            writeln!(csv, "{p},{}", format_sig(*v, 6)).unwrap();
        }
        let volumes = dir.join("volumes.csv");
        write_file(&volumes, csv)?;
        Ok(vec![dir.join(super::manifest::MANIFEST_FILE), record, volumes])
    }
}
