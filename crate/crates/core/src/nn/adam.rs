//! Adam with bias-corrected moment estimates.

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::model::{check_same_layout, Network};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Network,
    pub v: Network,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &Network) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// Elementwise update of one tensor at step `t` (already incremented):
///
/// ```text
/// m ← β1·m + (1−β1)·g
/// v ← β2·v + (1−β2)·g²
/// θ ← θ − lr · (m / (1−β1^t)) / (sqrt(v / (1−β2^t)) + ε)
/// ```
pub fn adam_update(theta: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], t: u64, cfg: &TrainConfig) -> Result<()> {
    if grad.len() != theta.len() || m.len() != theta.len() || v.len() != theta.len() {
        return Err(Error::shape(
            "adam_update",
            format!("params {}", theta.len()),
            format!("grads {} / moments {}, {}", grad.len(), m.len(), v.len()),
        ));
    }
    if t == 0 {
        return Err(Error::contract("adam step counter must be >= 1"));
    }
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let exp = i32::try_from(t).unwrap_or(i32::MAX);
    let c1 = 1.0 - b1.powi(exp);
    let c2 = 1.0 - b2.powi(exp);
    for i in 0..theta.len() {
        let g = grad[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        theta[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
    }
    Ok(())
}

/// One Adam step over every tensor of `params`.
pub fn adam_step(params: &mut Network, grads: &Network, state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    let lens: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    check_same_layout(&lens, &grads.tensors())?;
    check_same_layout(&lens, &state.m.tensors())?;
    check_same_layout(&lens, &state.v.tensors())?;
    state.t += 1;
    let t = state.t;
    let g = grads.tensors();
    let mut ms = state.m.tensors_mut();
    let mut vs = state.v.tensors_mut();
    for (k, theta) in params.tensors_mut().into_iter().enumerate() {
        adam_update(theta, g[k], ms[k], vs[k], t, cfg)?;
    }
    Ok(())
}
