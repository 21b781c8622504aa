//! Applies each augmentation family to one phantom slice and prints how the
//! image and mask change.
//!
//! `cargo run --release --example augment_gallery`

use seganet::augment::{
    additive_noise, augment_pipeline, crop_rotate, ffd_deform, intensity_scale, kspace_corrupt, rigid_augment,
    AugmentSpec, ControlGrid, KspaceMode, SliceSample,
};
use seganet::io::{generate_phantom, PhantomSpec};
use seganet::volumetrics::select_atrial_slices;

fn describe(name: &str, base: &SliceSample, out: &SliceSample) {
    let diff = base.image().iter().zip(out.image()).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
    let area = |s: &SliceSample| s.mask().iter().filter(|&&m| m == 1).count();
    println!("{name:<14} max |dI| {diff:.3}  mask area {} -> {}  spacing {:.3?}", area(base), area(out), out.spacing());
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let phantom = generate_phantom(&PhantomSpec::default())?;
    let k = select_atrial_slices(&phantom.lv_flags)?.start + 10;
    let [_, h, w] = phantom.spec.grid;
    let p = phantom.spec.max_phase;
    let base =
        SliceSample::new(h, w, phantom.images[p].slice(k).to_vec(), phantom.masks[p].slice(k).to_vec(), [1.25; 2])?;

    let spec = AugmentSpec { seed: 11, ..AugmentSpec::default() };
    let mut rng = spec.rng();
    describe("rigid", &base, &rigid_augment(&base, 12.0, (0.05, -0.08), (true, false))?);
    describe("crop-rotate", &base, &crop_rotate(&base, 0.85, -8.0, (0.3, 0.6))?);
    describe("noise", &base, &additive_noise(&base, 0.05, &mut rng)?);
    describe("k-space zero", &base, &kspace_corrupt(&base, 0.08, KspaceMode::Zero, &mut rng)?);
    describe("k-space noise", &base, &kspace_corrupt(&base, 0.08, KspaceMode::Noise, &mut rng)?);
    let grid = ControlGrid::new(5, (0..25).map(|i| ((i * 7) % 5) as f64 - 2.0).collect(), vec![1.5; 25])?;
    describe("ffd", &base, &ffd_deform(&base, &grid)?);
    describe("intensity", &base, &intensity_scale(&base, 1.2)?);
    for i in 0..3 {
        describe(&format!("pipeline #{i}"), &base, &augment_pipeline(&base, &spec, &mut rng)?);
    }
    Ok(())
}
