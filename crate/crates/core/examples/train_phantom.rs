//! Trains a reduced model on phantom slices and reports the training Dice.
//!
//! `cargo run --release --example train_phantom -- [iterations] [seed]`

use seganet::augment::{AugmentSpec, SliceSample};
use seganet::io::{generate_phantom, PhantomSpec};
use seganet::metrics::dice_coefficient;
use seganet::model::{segment_stack, ModelConfig};
use seganet::stack::{ImageStack, MaskStack};
use seganet::train::{train, TrainConfig};
use seganet::volumetrics::select_atrial_slices;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().map_or(Ok(200), |a| a.parse())?;
    let seed: u64 = args.next().map_or(Ok(0), |a| a.parse())?;

    let phantom = generate_phantom(&PhantomSpec::default())?;
    let atrial = select_atrial_slices(&phantom.lv_flags)?;
    let mid = (atrial.start + atrial.end) / 2;
    let [_, h, w] = phantom.spec.grid;
    let phase = phantom.spec.max_phase;
    let picks = [mid - 6, mid - 2, mid + 2, mid + 6];
    let slices = picks
        .iter()
        .map(|&k| {
            let (img, mask) = (phantom.images[phase].slice(k), phantom.masks[phase].slice(k));
            SliceSample::new(h, w, img.to_vec(), mask.to_vec(), [1.25, 1.25])
        })
        .collect::<Result<Vec<_>, _>>()?;

    let config = TrainConfig {
        iterations,
        batch_size: 4,
        learning_rate: 1e-4,
        seed,
        augment: AugmentSpec::disabled(),
        ..TrainConfig::default()
    };
    let (params, trace) = train(ModelConfig::with_channels(&[8, 16, 32, 64, 128]), &config, &slices)?;
    let smooth = trace.moving_average(20);
    for i in (0..trace.len()).step_by((trace.len() / 8).max(1)) {
        println!("iteration {i:>4}  loss {:.4}  (20-step mean {:.4})", trace.values[i], smooth[i]);
    }

    let sp = [1.25, 1.25, 2.5];
    let images = ImageStack::new([4, h, w], slices.iter().flat_map(|s| s.image().to_vec()).collect(), sp)?;
    let truth = MaskStack::new([4, h, w], slices.iter().flat_map(|s| s.mask().to_vec()).collect(), sp)?;
    let pred = segment_stack(&params, &images, 0.5)?;
    println!("training Dice {:.4}", dice_coefficient(&pred, &truth)?);
    Ok(())
}
