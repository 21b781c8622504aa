//! Dataset directories: a `manifest.txt` plus SGT stacks and LV flags.
//!
//! ```text
//! subject = phantom
//! spacing = 1.25 1.25 2.5
//! phases = 30
//! slices = 48
//! slice_order = apex_to_base
//! group = patient
//! lv_flags = lv_flags.txt
//! image.0 = images/phase_000.sgt
//! mask.0 = masks/phase_000.sgt
//! ```
//!
//! Every phase needs an image if any image is listed; masks may cover a
//! subset of phases (the annotated ones).

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::{Path, PathBuf};

use super::keyvalue::{self, Entry};
use super::{read_image_stack, read_mask_stack, read_text, write_file, write_image_stack, write_mask_stack, IoError};
use crate::augment::SliceSample;
use crate::numfmt::format_sig;
use crate::stack::{ImageStack, MaskStack, Spacing};

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceOrder {
    ApexToBase,
    BaseToApex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Patient,
    Volunteer,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Patient => "patient",
            Self::Volunteer => "volunteer",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub subject: Option<String>,
    pub spacing: Spacing,
    pub phases: usize,
    pub slices: usize,
    pub slice_order: SliceOrder,
    pub group: Option<Group>,
    /// Paths are relative to the dataset directory.
    pub lv_flags: Option<PathBuf>,
    pub images: BTreeMap<usize, PathBuf>,
    pub masks: BTreeMap<usize, PathBuf>,
}

impl Manifest {
    pub fn new(spacing: Spacing, phases: usize, slices: usize) -> Self {
        Self {
            subject: None,
            spacing,
            phases,
            slices,
            slice_order: SliceOrder::ApexToBase,
            group: None,
            lv_flags: None,
            images: BTreeMap::new(),
            masks: BTreeMap::new(),
        }
    }

    /// Parses manifest text. `path` is only used in diagnostics.
    pub fn parse(text: &str, path: &Path) -> Result<Self, IoError> {
        let invalid = |msg: String| IoError::Manifest { path: path.to_path_buf(), msg };
        let entries = keyvalue::parse(text, path)?;
        let find = |k: &str| entries.iter().find(|e| e.key == k);
        let need = |k: &str| find(k).ok_or_else(|| invalid(format!("missing key {k:?}")));
        let spacing: Spacing = keyvalue::values(need("spacing")?, path)?;
        let mut m =
            Manifest::new(spacing, keyvalue::value(need("phases")?, path)?, keyvalue::value(need("slices")?, path)?);
        m.subject = find("subject").map(|e| e.value.clone());
        if let Some(e) = find("slice_order") {
            m.slice_order = match e.value.as_str() {
                "apex_to_base" => SliceOrder::ApexToBase,
                "base_to_apex" => SliceOrder::BaseToApex,
                other => return Err(invalid(format!("unknown slice_order {other:?}"))),
            };
        }
        if let Some(e) = find("group") {
            m.group = Some(match e.value.as_str() {
                "patient" => Group::Patient,
                "volunteer" => Group::Volunteer,
                other => return Err(invalid(format!("unknown group {other:?}"))),
            });
        }
        m.lv_flags = find("lv_flags").map(|e| PathBuf::from(&e.value));
        for Entry { key, value, line } in &entries {
            let (kind, phase) = match key.split_once('.') {
                Some((kind @ ("image" | "mask"), p)) => (kind, p),
                _ if ["spacing", "phases", "slices", "subject", "slice_order", "group", "lv_flags"]
                    .contains(&key.as_str()) =>
                {
                    continue
                }
                _ => return Err(invalid(format!("line {line}: unknown key {key:?}"))),
            };
            let phase: usize = phase.parse().map_err(|_| invalid(format!("line {line}: bad phase in {key:?}")))?;
            let target = if kind == "image" { &mut m.images } else { &mut m.masks };
            target.insert(phase, PathBuf::from(value));
        }
        m.validate().map_err(invalid)?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), String> {
        if self.spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(format!("spacing must be positive, got {:?}", self.spacing));
        }
        if self.phases == 0 || self.slices == 0 {
            return Err("phases and slices must be positive".into());
        }
        if let Some(p) = self.images.keys().chain(self.masks.keys()).find(|&&p| p >= self.phases) {
            return Err(format!("phase {p} out of range for {} phases", self.phases));
        }
        if !self.images.is_empty() && self.images.len() != self.phases {
            return Err(format!("{} images listed for {} phases", self.images.len(), self.phases));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(subject) = &self.subject {
            writeln!(s, "subject = {subject}").unwrap();
        }
        let sp: Vec<String> = self.spacing.iter().map(|v| format_sig(*v, 9)).collect();
        writeln!(s, "spacing = {}", sp.join(" ")).unwrap();
        writeln!(s, "phases = {}", self.phases).unwrap();
        writeln!(s, "slices = {}", self.slices).unwrap();
        let order = match self.slice_order {
            SliceOrder::ApexToBase => "apex_to_base",
            SliceOrder::BaseToApex => "base_to_apex",
        };
        writeln!(s, "slice_order = {order}").unwrap();
        if let Some(g) = self.group {
            writeln!(s, "group = {}", g.as_str()).unwrap();
        }
        if let Some(p) = &self.lv_flags {
            writeln!(s, "lv_flags = {}", p.display()).unwrap();
        }
        for (p, path) in &self.images {
            writeln!(s, "image.{p} = {}", path.display()).unwrap();
        }
        for (p, path) in &self.masks {
            writeln!(s, "mask.{p} = {}", path.display()).unwrap();
        }
        s
    }

    pub fn read(dir: &Path) -> Result<Self, IoError> {
        let path = dir.join(MANIFEST_FILE);
        Self::parse(&read_text(&path)?, &path)
    }
}

/// One 0/1 flag per slice, whitespace separated.
pub fn read_lv_flags(path: &Path) -> Result<Vec<bool>, IoError> {
    read_text(path)?
        .split_whitespace()
        .enumerate()
        .map(|(i, t)| match t {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(IoError::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: format!("flag {i} is {t:?}, expected 0 or 1"),
            }),
        })
        .collect()
}

pub fn write_lv_flags(path: &Path, flags: &[bool]) -> Result<(), IoError> {
    let text: String = flags.iter().map(|&f| if f { "1\n" } else { "0\n" }).collect();
    write_file(path, text)
}

fn flip_image(s: ImageStack) -> Result<ImageStack, IoError> {
    let [n, h, w] = s.dims();
    let data = (0..n).rev().flat_map(|k| s.slice(k).to_vec()).collect();
    Ok(ImageStack::new([n, h, w], data, s.spacing())?)
}

fn flip_mask(s: MaskStack) -> Result<MaskStack, IoError> {
    let [n, h, w] = s.dims();
    let data = (0..n).rev().flat_map(|k| s.slice(k).to_vec()).collect();
    Ok(MaskStack::new([n, h, w], data, s.spacing())?)
}

/// A loaded dataset. Stacks and flags are always held apex to base.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub images: BTreeMap<usize, ImageStack>,
    pub masks: BTreeMap<usize, MaskStack>,
    pub lv_flags: Option<Vec<bool>>,
}

impl Dataset {
    /// Reads and validates every file referenced by `dir/manifest.txt`.
    pub fn load(dir: &Path) -> Result<Self, IoError> {
        let manifest = Manifest::read(dir)?;
        let mpath = dir.join(MANIFEST_FILE);
        let invalid = |msg: String| IoError::Manifest { path: mpath.clone(), msg };
        let reversed = manifest.slice_order == SliceOrder::BaseToApex;
        let check = |p: usize, dims: [usize; 3]| {
            if dims[0] != manifest.slices {
                Err(invalid(format!("phase {p} has {} slices, manifest says {}", dims[0], manifest.slices)))
            } else {
                Ok(())
            }
        };
        let mut images = BTreeMap::new();
        for (&p, rel) in &manifest.images {
            let s = read_image_stack(&dir.join(rel), manifest.spacing)?;
            check(p, s.dims())?;
            images.insert(p, if reversed { flip_image(s)? } else { s });
        }
        let mut masks = BTreeMap::new();
        for (&p, rel) in &manifest.masks {
            let s = read_mask_stack(&dir.join(rel), manifest.spacing)?;
            check(p, s.dims())?;
            if let Some(img) = images.get(&p) {
                if img.dims() != s.dims() {
                    return Err(invalid(format!("phase {p}: image dims {:?} vs mask dims {:?}", img.dims(), s.dims())));
                }
            }
            masks.insert(p, if reversed { flip_mask(s)? } else { s });
        }
        let lv_flags = match &manifest.lv_flags {
            Some(rel) => {
                let mut f = read_lv_flags(&dir.join(rel))?;
                if f.len() != manifest.slices {
                    return Err(invalid(format!("{} LV flags for {} slices", f.len(), manifest.slices)));
                }
                if reversed {
                    f.reverse();
                }
                Some(f)
            }
            None => None,
        };
        Ok(Self { manifest, images, masks, lv_flags })
    }

    /// Writes the dataset apex to base with conventional file names.
    pub fn save(&self, dir: &Path) -> Result<(), IoError> {
        let mut m = self.manifest.clone();
        m.slice_order = SliceOrder::ApexToBase;
        m.images.clear();
        m.masks.clear();
        for (&p, s) in &self.images {
            let rel = PathBuf::from(format!("images/phase_{p:03}.sgt"));
            write_image_stack(&dir.join(&rel), s)?;
            m.images.insert(p, rel);
        }
        for (&p, s) in &self.masks {
            let rel = PathBuf::from(format!("masks/phase_{p:03}.sgt"));
            write_mask_stack(&dir.join(&rel), s)?;
            m.masks.insert(p, rel);
        }
        m.lv_flags = match &self.lv_flags {
            Some(f) => {
                write_lv_flags(&dir.join("lv_flags.txt"), f)?;
                Some(PathBuf::from("lv_flags.txt"))
            }
            None => None,
        };
        m.validate().map_err(|msg| IoError::Manifest { path: dir.join(MANIFEST_FILE), msg })?;
        write_file(&dir.join(MANIFEST_FILE), m.to_text())
    }

    /// Display name: the manifest subject or the directory name.
    pub fn subject(&self, dir: &Path) -> String {
        self.manifest
            .subject
            .clone()
            .or_else(|| dir.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "subject".into())
    }

    /// Every slice of every phase that has both an image and a mask.
    pub fn training_slices(&self) -> Result<Vec<SliceSample>, IoError> {
        let [dx, dy, _] = self.manifest.spacing;
        let mut out = Vec::new();
        for (p, mask) in &self.masks {
            let Some(img) = self.images.get(p) else { continue };
            let [n, h, w] = img.dims();
            for k in 0..n {
                let s = SliceSample::new(h, w, img.slice(k).to_vec(), mask.slice(k).to_vec(), [dx, dy])
                    .map_err(|e| IoError::Corrupt(format!("phase {p} slice {k}: {e}")))?;
                out.push(s);
            }
        }
        Ok(out)
    }
}
