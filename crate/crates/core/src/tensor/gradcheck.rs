//! Central finite-difference verification of analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Graph, Tensor, TensorError, Var};

const PROJECTION_SEED: u64 = 0x6772_6164_6368_6b00;

/// Relative error measure used by the checker:
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-12)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

fn objective<F>(op: &F, inputs: &[Tensor<f64>], weights: Option<&[f64]>) -> Result<(f64, Vec<f64>), TensorError>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var, TensorError>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), false)).collect();
    let out = op(&mut g, &vars)?;
    let y = g.value(out);
    if !y.is_finite() {
        return Err(TensorError::NonFinite("grad_check objective"));
    }
    let w: Vec<f64> = match weights {
        Some(w) => w.to_vec(),
        None => projection(y.numel()),
    };
    let value = y.data().iter().zip(&w).map(|(a, b)| a * b).sum();
    Ok((value, w))
}

fn projection(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(PROJECTION_SEED);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Checks the gradient of every element of every input.
///
/// A non-scalar output is reduced to a scalar with a fixed pseudo-random
/// projection so the full vector-Jacobian product is exercised. Returns the
/// maximum relative error over all checked elements.
pub fn grad_check<F>(op: F, inputs: &[Tensor<f64>], h: f64) -> Result<f64, TensorError>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var, TensorError>,
{
    let probes: Vec<(usize, usize)> =
        inputs.iter().enumerate().flat_map(|(i, t)| (0..t.numel()).map(move |j| (i, j))).collect();
    grad_check_probes(op, inputs, h, &probes)
}

/// Like [`grad_check`] but only for the listed `(input index, element index)`
/// probes, for inputs too large to check exhaustively.
pub fn grad_check_probes<F>(
    op: F,
    inputs: &[Tensor<f64>],
    h: f64,
    probes: &[(usize, usize)],
) -> Result<f64, TensorError>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var, TensorError>,
{
    if !(h > 0.0) {
        return Err(TensorError::InvalidArgument { op: "grad_check", msg: "h must be positive".into() });
    }
    if inputs.iter().any(|t| !t.is_finite()) {
        return Err(TensorError::NonFinite("grad_check input"));
    }
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
    let out = op(&mut g, &vars)?;
    let weights = projection(g.value(out).numel());
    let seed = Tensor::new(g.value(out).dims().to_vec(), weights.clone())?;
    g.backward_with_seed(out, &seed)?;

    let mut worst = 0.0f64;
    let mut perturbed = inputs.to_vec();
    for &(i, j) in probes {
        let analytic = g.grad(vars[i]).map_or(0.0, |gr| gr[j]);
        let orig = inputs[i].data()[j];
        perturbed[i].data_mut()[j] = orig + h;
        let (plus, _) = objective(&op, &perturbed, Some(&weights))?;
        perturbed[i].data_mut()[j] = orig - h;
        let (minus, _) = objective(&op, &perturbed, Some(&weights))?;
        perturbed[i].data_mut()[j] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        if !analytic.is_finite() || !numeric.is_finite() {
            return Err(TensorError::NonFinite("grad_check derivative"));
        }
        worst = worst.max(relative_error(analytic, numeric));
    }
    Ok(worst)
}
