use alloc::string::String;
use alloc::vec::Vec;

use super::tape::{backward, loss_value};
use crate::augment::PairBatch;
use crate::model::forward;
use crate::model::{DemucsConfig, ModelParams};
use crate::objective::{branch_loss, LossBranch, StftConfig};
use crate::tensor::Tensor;
use crate::Result;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    /// `‖a − n‖∞ / max(‖a‖∞, ‖n‖∞, 1e-8)` over the checked entries.
    pub rel_err: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradReport {
    pub loss: f64,
    pub tensors: Vec<TensorCheck>,
    pub max_rel_err: f64,
    pub passed: bool,
    /// Smallest STFT magnitude of the model output relative to the median
    /// one. Near-empty bins make `log |Y|` so curved that differences of
    /// step `h` stop resolving the gradient.
    pub min_rel_magnitude: f64,
}

/// Smallest STFT magnitude of `y` over all resolutions, relative to the
/// median magnitude.
pub fn min_rel_magnitude(y: &[f64], resolutions: &[StftConfig]) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for cfg in resolutions {
        let mut m = crate::objective::stft_mag(y, cfg)?;
        m.sort_by(f64::total_cmp);
        let median = m[m.len() / 2];
        if median > 0.0 {
            worst = worst.min(m[0] / median);
        }
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckOptions {
    /// Central difference step.
    pub h: f64,
    /// Limits the entries checked in each tensor (evenly spaced).
    pub per_tensor: Option<usize>,
    /// Difference the loss with its absolute-value signs frozen at the
    /// base point instead of the loss itself.
    pub freeze_branch: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            h: DEFAULT_STEP,
            per_tensor: None,
            freeze_branch: true,
        }
    }
}

fn probe_loss(
    params: &ModelParams,
    config: &DemucsConfig,
    batch: &PairBatch,
    beta: f64,
    resolutions: &[StftConfig],
    branches: Option<&[LossBranch]>,
) -> Result<f64> {
    let Some(branches) = branches else {
        return loss_value(params, config, batch, beta, resolutions);
    };
    let y_hat = forward(params, config, &batch.noisy())?;
    let n = batch.batch();
    let mut loss = 0.0;
    for (b, br) in branches.iter().enumerate() {
        loss += branch_loss(batch.clean.item(b), y_hat.item(b), beta, resolutions, br)? / n as f64;
    }
    Ok(loss)
}

/// Compares analytic gradients with central differences.
pub fn grad_check(
    params: &ModelParams,
    config: &DemucsConfig,
    batch: &PairBatch,
    beta: f64,
    resolutions: &[StftConfig],
    opts: &CheckOptions,
) -> Result<GradReport> {
    let analytic = backward(params, config, batch, beta, resolutions)?;
    let y_hat = forward(params, config, &batch.noisy())?;
    let mut min_rel = f64::INFINITY;
    for b in 0..batch.batch() {
        min_rel = min_rel.min(min_rel_magnitude(y_hat.item(b), resolutions)?);
    }
    let branches = if opts.freeze_branch {
        let y_hat = forward(params, config, &batch.noisy())?;
        Some(
            (0..batch.batch())
                .map(|b| LossBranch::at(batch.clean.item(b), y_hat.item(b), resolutions))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    let (h, per_tensor) = (opts.h, opts.per_tensor);
    let names: Vec<(String, Vec<f64>)> = analytic
        .grads
        .named()
        .into_iter()
        .map(|(n, t)| (n, t.data().to_vec()))
        .collect();
    let mut work = params.clone();
    let mut tensors = Vec::with_capacity(names.len());
    for (k, (name, ga)) in names.iter().enumerate() {
        let n = ga.len();
        let count = per_tensor.map_or(n, |c| c.min(n));
        let idx: Vec<usize> = if count == n {
            (0..n).collect()
        } else {
            (0..count).map(|i| i * n / count).collect()
        };
        let (mut diff, mut na, mut nn) = (0.0f64, 0.0f64, 0.0f64);
        for &j in &idx {
            let orig = work.tensors_mut()[k].data()[j];
            work.tensors_mut()[k].data_mut()[j] = orig + h;
            let up = probe_loss(&work, config, batch, beta, resolutions, branches.as_deref())?;
            work.tensors_mut()[k].data_mut()[j] = orig - h;
            let down = probe_loss(&work, config, batch, beta, resolutions, branches.as_deref())?;
            work.tensors_mut()[k].data_mut()[j] = orig;
            let num = (up - down) / (2.0 * h);
            diff = diff.max((num - ga[j]).abs());
            na = na.max(ga[j].abs());
            nn = nn.max(num.abs());
        }
        tensors.push(TensorCheck {
            name: name.clone(),
            checked: idx.len(),
            rel_err: diff / na.max(nn).max(1e-8),
        });
    }
    let max_rel_err = tensors.iter().fold(0.0f64, |m, t| m.max(t.rel_err));
    Ok(GradReport {
        loss: analytic.loss,
        tensors,
        max_rel_err,
        passed: max_rel_err < TOLERANCE,
        min_rel_magnitude: min_rel,
    })
}

/// Sets every bias to a small random value. With zero biases the padded
/// region puts pre-activations exactly on the ReLU kink, where one-sided
/// differences disagree with any subgradient.
pub fn nudge_biases(params: &mut ModelParams, scale: f64, seed: u64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<bool> = params
        .named()
        .iter()
        .map(|(n, _)| n.ends_with("bias"))
        .collect();
    for (is_bias, t) in names.into_iter().zip(params.tensors_mut()) {
        if is_bias {
            t.data_mut()
                .iter_mut()
                .for_each(|v| *v = rng.random_range(-scale..scale));
        }
    }
}

/// Smallest acceptable [`GradReport::min_rel_magnitude`] for a base point.
pub const MIN_CONDITIONING: f64 = 1e-3;

/// A random `(clean, noise)` pair of `len` samples whose model output has
/// no STFT bin below `threshold` times the median. Data seeds are tried
/// from `seed` upwards; the one used is returned.
pub fn conditioned_pair(
    params: &ModelParams,
    config: &DemucsConfig,
    len: usize,
    seed: u64,
    threshold: f64,
    resolutions: &[StftConfig],
) -> Result<(PairBatch, u64)> {
    use rand::{Rng, SeedableRng};
    for s in seed..seed + 256 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(s);
        let clean: Vec<f64> = (0..len).map(|_| rng.random_range(-0.5..0.5)).collect();
        let noise: Vec<f64> = (0..len).map(|_| rng.random_range(-0.1..0.1)).collect();
        let batch = PairBatch::new(Tensor::from_signal(&clean), Tensor::from_signal(&noise))?;
        let y_hat = forward(params, config, &batch.noisy())?;
        if min_rel_magnitude(y_hat.data(), resolutions)? >= threshold {
            return Ok((batch, s));
        }
    }
    Err(crate::Error::InvalidArgument(alloc::format!(
        "no data seed in {seed}..{} gives output bins above {threshold} of the median",
        seed + 256
    )))
}
