//! Dice, Hausdorff and median contour distance between a ground-truth
//! phantom mask and a perturbed copy, per stack and per slice.
//!
//! `cargo run --release --example segmentation_metrics`

use seganet::io::{generate_phantom, PhantomSpec};
use seganet::metrics::compare_stacks;
use seganet::stack::MaskStack;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let phantom = generate_phantom(&PhantomSpec::coarse())?;
    let gt = &phantom.masks[phantom.spec.max_phase];
    let [s, h, w] = gt.dims();
    // Prediction: ground truth shifted two columns to the right.
    let pred = MaskStack::from_fn([s, h, w], gt.spacing(), |k, r, c| c >= 2 && gt.get(k, r, c - 2))?;

    let report = compare_stacks(&pred, gt)?;
    let mm = |d: Option<f64>| d.map_or("n/a".to_string(), |d| format!("{d:.2} mm"));
    println!("stack: Dice {:.4}, HD {}, MCD {}", report.dice, mm(report.hausdorff_mm), mm(report.mcd_mm));
    for sm in &report.slices {
        println!("slice {:>2}: Dice {:.4}, HD {}, MCD {}", sm.slice, sm.dice, mm(sm.hausdorff_mm), mm(sm.mcd_mm));
    }
    Ok(())
}
