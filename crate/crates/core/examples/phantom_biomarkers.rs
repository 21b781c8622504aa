//! Generates the phantom, extracts the atrial volume curve, finds the
//! landmarks and writes the report files.
//!
//! `cargo run --release --example phantom_biomarkers -- [out-dir]`

use std::path::PathBuf;

use seganet::io::{generate_phantom, write_report, PhantomSpec};
use seganet::volumetrics::{atrial_volume_curve, ejection_fractions, find_landmarks, select_atrial_slices};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("seganet_phantom"), PathBuf::from);
    let spec = PhantomSpec::default();
    let phantom = generate_phantom(&spec)?;
    phantom.write(&out)?;

    let atrial = select_atrial_slices(&phantom.lv_flags)?;
    println!("atrial slices {atrial:?} (first one is the basal slice)");
    let curve = atrial_volume_curve(&phantom.masks, &phantom.lv_flags)?;
    let landmarks = find_landmarks(&curve, 1)?;
    let fractions = ejection_fractions(&landmarks)?;
    println!(
        "V_max {:.2} mL @ {}, V_preA {:.2} mL @ {}, V_min {:.2} mL @ {}",
        landmarks.v_max_ml,
        landmarks.max_phase,
        landmarks.v_prea_ml,
        landmarks.prea_phase,
        landmarks.v_min_ml,
        landmarks.min_phase
    );
    println!(
        "EF {:.2}% (analytic {:.2}%), aEF {:.2}% (analytic {:.2}%)",
        fractions.ef_percent,
        (spec.v_max - spec.v_min) / spec.v_max * 100.0,
        fractions.aef_percent,
        (spec.v_prea - spec.v_min) / spec.v_prea * 100.0
    );
    let paths = write_report(&curve, &landmarks, &fractions, &out.join("report"))?;
    println!("dataset in {}, plot in {}", out.display(), paths.svg.display());
    Ok(())
}
