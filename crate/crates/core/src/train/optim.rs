use alloc::vec::Vec;

use crate::math::{pow, sqrt};
use crate::model::ModelParams;
use crate::{Error, Result};

/// Adam moments for every parameter tensor, in [`ModelParams::named`] order.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub const DEFAULT_LR: f64 = 3e-4;

    pub fn new(params: &ModelParams, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params
            .named()
            .iter()
            .map(|(_, t)| alloc::vec![0.0; t.numel()])
            .collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
) -> Result<()> {
    let g: Vec<&[f64]> = grads.named().into_iter().map(|(_, t)| t.data()).collect();
    let mut p = params.tensors_mut();
    if g.len() != p.len()
        || g.len() != state.m.len()
        || p.iter().zip(&g).any(|(a, b)| a.numel() != b.len())
    {
        return Err(Error::ParamsMismatch(
            "gradients do not match parameters".into(),
        ));
    }
    if g.iter().any(|t| t.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("gradient"));
    }
    state.step += 1;
    let c1 = 1.0 - pow(state.beta1, state.step as f64);
    let c2 = 1.0 - pow(state.beta2, state.step as f64);
    for (k, t) in p.iter_mut().enumerate() {
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for (j, w) in t.data_mut().iter_mut().enumerate() {
            let gj = g[k][j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
            *w -= state.lr * (m[j] / c1) / (sqrt(v[j] / c2) + state.eps);
        }
    }
    Ok(())
}
