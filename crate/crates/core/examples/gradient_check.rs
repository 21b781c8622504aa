//! Finite-difference check of every differentiable primitive in 64-bit.
//!
//! `cargo run --release --example gradient_check`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seganet::tensor::{grad_check, Tensor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut random = |dims: &[usize]| Tensor::from_fn(dims.to_vec(), |_| rng.random_range(-1.0..1.0));
    let x = random(&[2, 2, 6, 6])?;
    let w = random(&[3, 2, 3, 3])?;
    let wt = random(&[2, 3, 3, 3])?;
    let bias = random(&[3])?;
    let gamma = random(&[2])?;
    let beta = random(&[2])?;
    let slope = Tensor::new([2], vec![0.25, -0.1])?;
    let probs = Tensor::from_fn([2, 1, 4, 4], |i| 0.1 + 0.8 * ((i * 37) % 11) as f64 / 11.0)?;
    let target = Tensor::from_fn([2, 1, 4, 4], |i| (i % 3 == 0) as u8 as f64)?;

    let h = 1e-5;
    let checks = [
        (
            "conv2d",
            grad_check(|g, v| g.conv2d(v[0], v[1], Some(v[2]), 1, 1), &[x.clone(), w.clone(), bias.clone()], h)?,
        ),
        ("conv2d stride 2", grad_check(|g, v| g.conv2d(v[0], v[1], None, 2, 1), &[x.clone(), w.clone()], h)?),
        ("conv_transpose2d", grad_check(|g, v| g.conv_transpose2d(v[0], v[1], None, 2, 1), &[x.clone(), wt], h)?),
        ("instance_norm", grad_check(|g, v| g.instance_norm(v[0], v[1], v[2], 1e-5), &[x.clone(), gamma, beta], h)?),
        ("prelu", grad_check(|g, v| g.prelu(v[0], v[1]), &[x.clone(), slope], h)?),
        ("sigmoid", grad_check(|g, v| Ok(g.sigmoid(v[0])), std::slice::from_ref(&x), h)?),
        ("add", grad_check(|g, v| g.add(v[0], v[1]), &[x.clone(), x.clone()], h)?),
        ("concat", grad_check(|g, v| g.concat_channels(v[0], v[1]), &[x.clone(), x], h)?),
        ("dice_loss", grad_check(|g, v| g.dice_loss(v[0], &target, 1e-5), &[probs], h)?),
    ];
    for (name, err) in checks {
        println!("{name:<18} max relative error {err:.2e}");
    }
    Ok(())
}
