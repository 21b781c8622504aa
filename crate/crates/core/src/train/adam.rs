use super::{TrainConfig, TrainError};

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f32>,
    pub v: Vec<f32>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }
}

/// One Adam update with bias correction. Gradients are checked before
/// anything is modified, so a failed step leaves params and state untouched.
pub fn adam_step(
    params: &mut [f32],
    grads: &[f32],
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<(), TrainError> {
    let n = params.len();
    if grads.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(TrainError::LengthMismatch);
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(TrainError::NonFiniteGradient(i));
    }
    state.t += 1;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let c1 = 1.0 - b1.powf(state.t as f64);
    let c2 = 1.0 - b2.powf(state.t as f64);
    let lr = config.learning_rate;
    for i in 0..n {
        let g = grads[i] as f64;
        let m = b1 * state.m[i] as f64 + (1.0 - b1) * g;
        let v = b2 * state.v[i] as f64 + (1.0 - b2) * g * g;
        state.m[i] = m as f32;
        state.v[i] = v as f32;
        let step = lr * (m / c1) / ((v / c2).sqrt() + config.adam_epsilon);
        params[i] = (params[i] as f64 - step) as f32;
    }
    Ok(())
}
