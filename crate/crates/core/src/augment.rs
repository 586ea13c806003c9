//! Waveform augmentations on (clean, noise) pairs. The noisy input is always
//! recomputed as `clean + noise`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::math::{ceil, cos, log10, pow, round, sinc, PI};
use crate::objective::fft;
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PairBatch {
    pub clean: Tensor,
    pub noise: Tensor,
}

impl PairBatch {
    pub fn new(clean: Tensor, noise: Tensor) -> Result<Self> {
        if clean.shape() != noise.shape() || clean.channels() != 1 {
            return Err(Error::shape(format!(
                "clean {:?} and noise {:?} must be equal mono batches",
                clean.shape(),
                noise.shape()
            )));
        }
        Ok(Self { clean, noise })
    }

    pub fn noisy(&self) -> Tensor {
        self.clean
            .add(&self.noise)
            .expect("shapes checked at construction")
    }

    pub fn batch(&self) -> usize {
        self.clean.batch()
    }

    pub fn time(&self) -> usize {
        self.clean.time()
    }
}

/// Shifts each item by a random offset in `0..=max_shift` samples (the same
/// for its clean and noise rows) and trims everything to `T − max_shift`.
pub fn shift<R: Rng + ?Sized>(
    batch: &PairBatch,
    max_shift: usize,
    rng: &mut R,
) -> Result<PairBatch> {
    let t = batch.time();
    if max_shift >= t && max_shift > 0 {
        return Err(Error::InvalidArgument(format!(
            "shift {max_shift} is not shorter than the signal ({t})"
        )));
    }
    if max_shift == 0 {
        return Ok(batch.clone());
    }
    let len = t - max_shift;
    let b = batch.batch();
    let mut clean = Tensor::zeros([b, 1, len]);
    let mut noise = Tensor::zeros([b, 1, len]);
    for i in 0..b {
        let o = rng.random_range(0..=max_shift);
        clean
            .row_mut(i, 0)
            .copy_from_slice(&batch.clean.row(i, 0)[o..o + len]);
        noise
            .row_mut(i, 0)
            .copy_from_slice(&batch.noise.row(i, 0)[o..o + len]);
    }
    PairBatch::new(clean, noise)
}

/// Permutes the noise rows across the batch. A batch of one is returned
/// unchanged.
pub fn remix<R: Rng + ?Sized>(batch: &PairBatch, rng: &mut R) -> PairBatch {
    let b = batch.batch();
    if b < 2 {
        log::warn!("remix needs at least two items, batch has {b}; leaving it unchanged");
        return batch.clone();
    }
    let mut order: Vec<usize> = (0..b).collect();
    order.shuffle(rng);
    let mut noise = batch.noise.clone();
    for (dst, &src) in order.iter().enumerate() {
        noise.item_mut(dst).copy_from_slice(batch.noise.item(src));
    }
    PairBatch {
        clean: batch.clean.clone(),
        noise,
    }
}

pub fn mel(f: f64) -> f64 {
    2595.0 * log10(1.0 + f / 700.0)
}

pub fn mel_inv(m: f64) -> f64 {
    700.0 * (pow(10.0, m / 2595.0) - 1.0)
}

/// Longest half-length of a lowpass kernel, in samples.
pub const MAX_HALF_LENGTH: usize = 8192;

/// Zero-phase Hann-windowed sinc lowpass with cutoff `fc` in cycles per
/// sample, `2M + 1` taps with `M = ceil(8 / fc)` (capped), unit DC gain.
pub fn lowpass_kernel(fc: f64) -> Vec<f64> {
    let half = (ceil(8.0 / fc) as usize).clamp(1, MAX_HALF_LENGTH);
    let n = 2 * half + 1;
    let mut h: Vec<f64> = (0..n)
        .map(|j| {
            let t = j as f64 - half as f64;
            let w = 0.5 - 0.5 * cos(2.0 * PI * j as f64 / (n - 1) as f64);
            2.0 * fc * sinc(2.0 * PI * fc * t) * w
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    h
}

/// `y[t] = Σ_j h[j] x[t + half − j]` with zeros outside `x`, via FFT.
fn convolve_centered(x: &[f64], h: &[f64]) -> Vec<f64> {
    let half = h.len() / 2;
    let n = (x.len() + h.len()).next_power_of_two();
    let (mut xr, mut xi) = (vec![0.0; n], vec![0.0; n]);
    let (mut hr, mut hi) = (vec![0.0; n], vec![0.0; n]);
    xr[..x.len()].copy_from_slice(x);
    hr[..h.len()].copy_from_slice(h);
    fft(&mut xr, &mut xi);
    fft(&mut hr, &mut hi);
    // product, then inverse through conj(FFT(conj(·)))
    for k in 0..n {
        let (a, b) = (xr[k] * hr[k] - xi[k] * hi[k], xr[k] * hi[k] + xi[k] * hr[k]);
        xr[k] = a;
        xi[k] = -b;
    }
    fft(&mut xr, &mut xi);
    (0..x.len()).map(|t| xr[t + half] / n as f64).collect()
}

/// Lowpass at `cutoff` Hz. A cutoff at or below 0 Hz removes everything;
/// one at or above Nyquist keeps everything.
pub fn lowpass(x: &[f64], cutoff: f64, sample_rate: f64) -> Vec<f64> {
    let fc = cutoff / sample_rate;
    if fc <= 0.0 {
        return vec![0.0; x.len()];
    }
    if fc >= 0.5 {
        return x.to_vec();
    }
    convolve_centered(x, &lowpass_kernel(fc))
}

/// Removes `[f0, f1]` Hz: `lowpass(f0) + x − lowpass(f1)`.
pub fn band_stop(x: &[f64], f0: f64, f1: f64, sample_rate: f64) -> Vec<f64> {
    let lo = lowpass(x, f0, sample_rate);
    let hi = lowpass(x, f1, sample_rate);
    x.iter()
        .zip(lo.iter().zip(&hi))
        .map(|(v, (l, h))| l + v - h)
        .collect()
}

/// Draws a band covering `width` of the mel axis up to Nyquist, placed
/// uniformly. Returns `(f0, f1)` in Hz.
pub fn draw_band<R: Rng + ?Sized>(width: f64, sample_rate: f64, rng: &mut R) -> Result<(f64, f64)> {
    if !(width > 0.0 && width < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "band width must lie in (0, 1), got {width}"
        )));
    }
    let top = mel(sample_rate / 2.0);
    let low = rng.random_range(0.0..=top * (1.0 - width));
    Ok((mel_inv(low), mel_inv(low + width * top)))
}

/// Applies a mel-uniform band-stop to each item (same band for its clean
/// and noise rows, a fresh band per item).
pub fn bandmask<R: Rng + ?Sized>(
    batch: &PairBatch,
    width: f64,
    sample_rate: f64,
    rng: &mut R,
) -> Result<PairBatch> {
    let mut out = batch.clone();
    for i in 0..batch.batch() {
        let (f0, f1) = draw_band(width, sample_rate, rng)?;
        let c = band_stop(batch.clean.row(i, 0), f0, f1, sample_rate);
        let n = band_stop(batch.noise.row(i, 0), f0, f1, sample_rate);
        out.clean.row_mut(i, 0).copy_from_slice(&c);
        out.noise.row_mut(i, 0).copy_from_slice(&n);
    }
    Ok(out)
}

/// One echo series: the `n`-th echo (`n = 1..=N`) has gain `ρ^n λ` and
/// delay `round(n τ · rate · j_n)` samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RevechoParams {
    /// Gain `λ` of the series.
    pub initial: f64,
    /// Delay `τ` between echoes, seconds.
    pub delay: f64,
    /// Seconds for the series to decay by 60 dB.
    pub rt60: f64,
    /// Each delay is scaled by a factor drawn from `U[1 − jitter, 1 + jitter]`.
    pub jitter: f64,
}

impl RevechoParams {
    /// `λ ~ U[0, 0.3]`, `τ ~ U[10, 30] ms`, `RT60 ~ U[0.3, 1.3] s`, jitter 0.1.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            initial: rng.random_range(0.0..=0.3),
            delay: rng.random_range(0.010..=0.030),
            rt60: rng.random_range(0.3..=1.3),
            jitter: 0.1,
        }
    }

    /// `ρ = (1e−3)^(τ / RT60)`.
    pub fn rho(&self) -> f64 {
        pow(1e-3, self.delay / self.rt60)
    }

    /// `N = ceil(RT60 / τ)`, so that `ρ^N ≤ 1e−3`.
    pub fn count(&self) -> usize {
        ceil(self.rt60 / self.delay - 1e-9) as usize
    }

    /// Per-echo delay factors.
    pub fn draw_jitter<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.count())
            .map(|_| {
                if self.jitter > 0.0 {
                    rng.random_range(1.0 - self.jitter..=1.0 + self.jitter)
                } else {
                    1.0
                }
            })
            .collect()
    }
}

/// The echo tail alone (without the direct signal), truncated to `x.len()`.
pub fn echo_train(
    x: &[f64],
    params: &RevechoParams,
    factors: &[f64],
    sample_rate: f64,
) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    let rho = params.rho();
    let mut gain = params.initial;
    for (n, f) in (1..=params.count()).zip(factors) {
        gain *= rho;
        let d = round(n as f64 * params.delay * sample_rate * f) as usize;
        if d >= x.len() {
            continue;
        }
        for (o, v) in out[d..].iter_mut().zip(x) {
            *o += gain * v;
        }
    }
    out
}

/// Where the echoes of the clean signal go.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReverbPolicy {
    /// Into the target: the model learns to keep reverberation.
    Keep,
    /// Into the noise: the model learns to remove it.
    Remove,
    /// This fraction into the target, the rest into the noise.
    Partial(f64),
}

impl ReverbPolicy {
    fn keep(&self) -> f64 {
        match *self {
            ReverbPolicy::Keep => 1.0,
            ReverbPolicy::Remove => 0.0,
            ReverbPolicy::Partial(f) => f.clamp(0.0, 1.0),
        }
    }
}

/// Adds decaying echoes of clean and noise with probability `p` per item.
/// With `two_sources` the two series get independent jitter.
pub fn revecho<R: Rng + ?Sized>(
    batch: &PairBatch,
    p: f64,
    policy: ReverbPolicy,
    two_sources: bool,
    sample_rate: f64,
    rng: &mut R,
) -> PairBatch {
    let mut out = batch.clone();
    for i in 0..batch.batch() {
        if !rng.random_bool(p.clamp(0.0, 1.0)) {
            continue;
        }
        let params = RevechoParams::sample(rng);
        let jc = params.draw_jitter(rng);
        let jn = if two_sources {
            params.draw_jitter(rng)
        } else {
            jc.clone()
        };
        let (c, n) = (batch.clean.row(i, 0), batch.noise.row(i, 0));
        let tc = echo_train(c, &params, &jc, sample_rate);
        let tn = echo_train(n, &params, &jn, sample_rate);
        let keep = policy.keep();
        for (t, v) in out.clean.row_mut(i, 0).iter_mut().enumerate() {
            *v = c[t] + keep * tc[t];
        }
        for (t, v) in out.noise.row_mut(i, 0).iter_mut().enumerate() {
            *v = n[t] + (1.0 - keep) * tc[t] + tn[t];
        }
    }
    out
}
