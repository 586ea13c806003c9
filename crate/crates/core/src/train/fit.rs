use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::optim::{adam_step, AdamState};
use super::tape::backward;
use crate::augment::{shift, PairBatch};
use crate::model::{DemucsConfig, ModelParams};
use crate::objective::{StftConfig, DEFAULT_RESOLUTIONS, DEFAULT_STFT_WEIGHT};
use crate::{Error, Result};

/// Loss growth over the first value that counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub lr: f64,
    pub beta: f64,
    pub resolutions: Vec<StftConfig>,
    /// Maximum random shift in samples; 0 disables it.
    pub max_shift: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            lr: AdamState::DEFAULT_LR,
            beta: DEFAULT_STFT_WEIGHT,
            resolutions: DEFAULT_RESOLUTIONS.to_vec(),
            max_shift: 0,
            seed: 0,
        }
    }
}

/// Trains `params` in place on one batch for `steps` Adam updates.
/// Returns the loss before each update and after the last one
/// (`steps + 1` values).
pub fn overfit(
    params: &mut ModelParams,
    config: &DemucsConfig,
    data: &PairBatch,
    steps: usize,
    opts: &FitOptions,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut adam = AdamState::new(params, opts.lr);
    let mut curve = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let batch = shift(data, opts.max_shift, &mut rng)?;
        let g = backward(params, config, &batch, opts.beta, &opts.resolutions)?;
        if let Some(&first) = curve.first() {
            let limit = DIVERGENCE_FACTOR * first;
            if g.loss > limit {
                return Err(Error::Diverged {
                    step,
                    loss: g.loss,
                    limit,
                });
            }
        }
        log::debug!("step {step}: loss {:.6}", g.loss);
        curve.push(g.loss);
        if step < steps {
            adam_step(params, &g.grads, &mut adam)?;
        }
    }
    Ok(curve)
}
