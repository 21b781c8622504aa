//! Compares EF between two synthetic cohorts with Welch's and the paired
//! t-test.
//!
//! `cargo run --release --example cohort_statistics`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use seganet::volumetrics::cohort_compare;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let patients: Vec<f64> = Normal::new(31.0, 9.0)?.sample_iter(&mut rng).take(60).collect();
    let volunteers: Vec<f64> = Normal::new(50.0, 9.0)?.sample_iter(&mut rng).take(12).collect();
    let welch = cohort_compare(&patients, &volunteers, false)?;
    println!(
        "patients {:.1} ± {:.1} (n={}), volunteers {:.1} ± {:.1} (n={})",
        welch.a.mean, welch.a.std, welch.a.n, welch.b.mean, welch.b.std, welch.b.n
    );
    println!("Welch: t = {:.3}, df = {:.1}, p = {:.2e}", welch.t, welch.df, welch.p);

    // Paired: EF of the same subjects measured by two readers.
    let reader_a = &patients[..12];
    let reader_b: Vec<f64> = reader_a.iter().zip(&volunteers).map(|(a, v)| a + 0.02 * (v - 50.0) + 0.5).collect();
    let paired = cohort_compare(reader_a, &reader_b, true)?;
    println!("paired: t = {:.3}, df = {}, p = {:.2e}", paired.t, paired.df, paired.p);
    Ok(())
}
