//! Builds the default residual U-Net, prints its layer graph and runs one
//! forward pass.
//!
//! `cargo run --release --example build_model`

use seganet::io::{decode_checkpoint, encode_checkpoint};
use seganet::model::{build_seganet, forward, ModelConfig};
use seganet::tensor::Tensor;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (params, arch) = build_seganet(ModelConfig::default(), 0)?;
    print!("{arch}");
    println!("encode channels {:?}, {} parameters", arch.encode_channels(), params.len());

    // Odd sizes are reflection-padded internally and cropped back.
    let x = Tensor::from_fn([1, 1, 72, 90], |i| ((i % 90) as f32 / 90.0).sin().abs())?;
    let y = forward(&params, &x)?;
    let (lo, hi) = y.data().iter().fold((1.0f32, 0.0f32), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    println!("input {:?} -> output {:?}, probabilities in [{lo:.3}, {hi:.3}]", x.dims(), y.dims());

    let bytes = encode_checkpoint(&params);
    let restored = decode_checkpoint(&bytes)?;
    println!("checkpoint {} bytes, round trip identical: {}", bytes.len(), restored == params);
    Ok(())
}
