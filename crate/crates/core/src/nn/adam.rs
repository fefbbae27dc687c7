use super::NetworkParams;
use crate::error::{contract, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Step along `+grad` instead of `-grad`.
    pub maximize: bool,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-5, maximize: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(num_params: usize, config: AdamConfig) -> Self {
        Self { m: vec![0.0; num_params], v: vec![0.0; num_params], step: 0, config }
    }

    pub fn for_params(params: &NetworkParams) -> Self {
        Self::new(params.len(), AdamConfig::default())
    }
}

/// One bias-corrected Adam update.
///
/// Coordinates whose gradient is exactly zero keep their value (their
/// moments still decay), so an all-zero gradient never moves the
/// parameters regardless of the accumulated moments.
pub fn adam_step(params: &mut NetworkParams, grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    let n = params.len();
    if grads.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(contract(format!(
            "adam shape mismatch: params {n}, grads {}, moments {}/{}",
            grads.len(),
            state.m.len(),
            state.v.len()
        )));
    }
    let AdamConfig { beta1, beta2, eps, maximize } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    let sign = if maximize { 1.0 } else { -1.0 };
    let data = params.as_mut_slice();
    for k in 0..n {
        let g = grads[k];
        state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g;
        state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * g * g;
        if g == 0.0 || lr == 0.0 {
            continue;
        }
        let m_hat = state.m[k] / bc1;
        let v_hat = state.v[k] / bc2;
        data[k] += sign * lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
