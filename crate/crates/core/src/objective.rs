//! Multi-resolution STFT objective and its gradient.
//!
//! `total = mean|y − ŷ| + β · Σ_i (L_sc,i + L_mag,i)` where, per resolution,
//! `L_sc = ‖|Y| − |Ŷ|‖_F / ‖|Y|‖_F` and
//! `L_mag = (1/T) · Σ |log max(|Y|, ε) − log max(|Ŷ|, ε)|` over every
//! frame and bin, `T` being the waveform length.
//!
//! Frames are centered: the signal is reflect-padded by `n_fft / 2` on each
//! side and a periodic Hann window of `win_length` samples sits in the middle
//! of each `n_fft` frame.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{cos, log, sign, sin, sqrt, PI};
use crate::{Error, Result};

/// Floor applied to magnitudes before the logarithm.
pub const MAG_FLOOR: f64 = 1e-7;

/// Weight of the spectral terms relative to the waveform L1 term.
pub const DEFAULT_STFT_WEIGHT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StftConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub win_length: usize,
}

impl StftConfig {
    pub const fn new(n_fft: usize, hop: usize, win_length: usize) -> Self {
        Self {
            n_fft,
            hop,
            win_length,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n_fft.is_power_of_two() || self.n_fft < 2 {
            return Err(Error::InvalidArgument(format!(
                "n_fft must be a power of two, got {}",
                self.n_fft
            )));
        }
        if self.hop == 0 || self.hop > self.win_length || self.win_length > self.n_fft {
            return Err(Error::InvalidArgument(format!(
                "need 0 < hop ≤ win_length ≤ n_fft, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn frames(&self, len: usize) -> usize {
        1 + len / self.hop
    }

    /// Shortest signal accepted: at least one window, and long enough for
    /// the reflect padding.
    pub fn min_len(&self) -> usize {
        self.win_length.max(self.n_fft / 2 + 1)
    }

    /// Periodic Hann window of `win_length`, zero-padded to `n_fft` and
    /// centered.
    pub fn window(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n_fft];
        let off = (self.n_fft - self.win_length) / 2;
        for n in 0..self.win_length {
            w[off + n] = 0.5 - 0.5 * cos(2.0 * PI * n as f64 / self.win_length as f64);
        }
        w
    }
}

/// The three resolutions `(n_fft, hop, win)`: (512, 50, 240),
/// (1024, 120, 600) and (2048, 240, 1200).
pub const DEFAULT_RESOLUTIONS: [StftConfig; 3] = [
    StftConfig::new(512, 50, 240),
    StftConfig::new(1024, 120, 600),
    StftConfig::new(2048, 240, 1200),
];

/// In-place iterative radix-2 FFT, `X[k] = Σ x[n] e^{−2πikn/N}`.
pub fn fft(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    assert!(
        n.is_power_of_two() && im.len() == n,
        "fft needs equal power-of-two lengths"
    );
    let bits = n.trailing_zeros();
    if bits == 0 {
        return;
    }
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = -2.0 * PI / len as f64;
        for k in 0..half {
            let (wr, wi) = (cos(step * k as f64), sin(step * k as f64));
            let mut start = 0;
            while start < n {
                let (a, b) = (start + k, start + k + half);
                let tr = re[b] * wr - im[b] * wi;
                let ti = re[b] * wi + im[b] * wr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                start += len;
            }
        }
        len *= 2;
    }
}

fn reflect_index(i: isize, len: usize) -> usize {
    let last = len as isize - 1;
    let j = if i < 0 {
        -i
    } else if i > last {
        2 * last - i
    } else {
        i
    };
    j as usize
}

/// One-sided complex STFT, frame-major: `[frames][bins]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub frames: usize,
    pub bins: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl Spectrum {
    pub fn magnitude(&self) -> Vec<f64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(r, i)| sqrt(r * r + i * i))
            .collect()
    }
}

pub fn stft(x: &[f64], cfg: &StftConfig) -> Result<Spectrum> {
    cfg.validate()?;
    if x.len() < cfg.min_len() {
        return Err(Error::SignalTooShort {
            len: x.len(),
            min: cfg.min_len(),
        });
    }
    let (n, bins, frames) = (cfg.n_fft, cfg.bins(), cfg.frames(x.len()));
    let pad = (n / 2) as isize;
    let w = cfg.window();
    let mut spec = Spectrum {
        frames,
        bins,
        re: vec![0.0; frames * bins],
        im: vec![0.0; frames * bins],
    };
    let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);
    for t in 0..frames {
        for j in 0..n {
            let i = (t * cfg.hop + j) as isize - pad;
            re[j] = x[reflect_index(i, x.len())] * w[j];
            im[j] = 0.0;
        }
        fft(&mut re, &mut im);
        spec.re[t * bins..(t + 1) * bins].copy_from_slice(&re[..bins]);
        spec.im[t * bins..(t + 1) * bins].copy_from_slice(&im[..bins]);
    }
    Ok(spec)
}

/// Magnitudes `[frames][n_fft/2 + 1]`, flattened frame-major.
pub fn stft_mag(x: &[f64], cfg: &StftConfig) -> Result<Vec<f64>> {
    Ok(stft(x, cfg)?.magnitude())
}

/// Adjoint of [`stft`] restricted to its one-sided output: maps a gradient
/// on the real and imaginary parts back onto the waveform.
fn stft_adjoint(g_re: &[f64], g_im: &[f64], len: usize, cfg: &StftConfig) -> Vec<f64> {
    let (n, bins, frames) = (cfg.n_fft, cfg.bins(), cfg.frames(len));
    let pad = (n / 2) as isize;
    let w = cfg.window();
    let mut out = vec![0.0; len];
    let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);
    for t in 0..frames {
        // d/df[n] = Σ_k (a_k cos θ − b_k sin θ) = Re(FFT(conj(G)))[n]
        re.iter_mut().for_each(|v| *v = 0.0);
        im.iter_mut().for_each(|v| *v = 0.0);
        re[..bins].copy_from_slice(&g_re[t * bins..(t + 1) * bins]);
        for k in 0..bins {
            im[k] = -g_im[t * bins + k];
        }
        fft(&mut re, &mut im);
        for j in 0..n {
            let i = (t * cfg.hop + j) as isize - pad;
            out[reflect_index(i, len)] += re[j] * w[j];
        }
    }
    out
}

fn check_pair(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.len() != y_hat.len() {
        return Err(Error::shape(format!(
            "signal lengths differ: {} vs {}",
            y.len(),
            y_hat.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::SignalTooShort { len: 0, min: 1 });
    }
    Ok(())
}

fn frobenius(a: &[f64], b: &[f64]) -> f64 {
    sqrt(a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum())
}

fn sc_from_mags(my: &[f64], mh: &[f64]) -> Result<f64> {
    let den = sqrt(my.iter().map(|v| v * v).sum());
    if den == 0.0 {
        return Err(Error::SilentReference);
    }
    Ok(frobenius(my, mh) / den)
}

fn mag_from_mags(my: &[f64], mh: &[f64], len: usize) -> f64 {
    let sum: f64 = my
        .iter()
        .zip(mh)
        .map(|(a, b)| (log(a.max(MAG_FLOOR)) - log(b.max(MAG_FLOOR))).abs())
        .sum();
    sum / len as f64
}

/// Spectral convergence. The normalization uses the reference `y` only.
pub fn loss_sc(y: &[f64], y_hat: &[f64], cfg: &StftConfig) -> Result<f64> {
    check_pair(y, y_hat)?;
    sc_from_mags(&stft_mag(y, cfg)?, &stft_mag(y_hat, cfg)?)
}

/// Log-magnitude distance, summed over frames and bins and divided by the
/// waveform length.
pub fn loss_mag(y: &[f64], y_hat: &[f64], cfg: &StftConfig) -> Result<f64> {
    check_pair(y, y_hat)?;
    Ok(mag_from_mags(
        &stft_mag(y, cfg)?,
        &stft_mag(y_hat, cfg)?,
        y.len(),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolutionLoss {
    pub config: StftConfig,
    pub sc: f64,
    pub mag: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    pub l1: f64,
    pub resolutions: Vec<ResolutionLoss>,
    pub stft_weight: f64,
    pub total: f64,
}

fn l1(y: &[f64], y_hat: &[f64]) -> f64 {
    y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64
}

pub fn total_loss(
    y: &[f64],
    y_hat: &[f64],
    beta: f64,
    resolutions: &[StftConfig],
) -> Result<LossReport> {
    Ok(total_loss_grad_impl(y, y_hat, beta, resolutions, false)?.0)
}

/// The loss and its gradient with respect to `y_hat`. The L1 term uses
/// `sign(0) = 0`; the log floor and a zero magnitude contribute nothing.
pub fn total_loss_grad(
    y: &[f64],
    y_hat: &[f64],
    beta: f64,
    resolutions: &[StftConfig],
) -> Result<(LossReport, Vec<f64>)> {
    total_loss_grad_impl(y, y_hat, beta, resolutions, true)
}

fn total_loss_grad_impl(
    y: &[f64],
    y_hat: &[f64],
    beta: f64,
    resolutions: &[StftConfig],
    want_grad: bool,
) -> Result<(LossReport, Vec<f64>)> {
    check_pair(y, y_hat)?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "stft weight must be ≥ 0, got {beta}"
        )));
    }
    let len = y.len();
    let l1v = l1(y, y_hat);
    let mut grad = if want_grad {
        y.iter()
            .zip(y_hat)
            .map(|(a, b)| sign(b - a) / len as f64)
            .collect()
    } else {
        Vec::new()
    };
    let mut per = Vec::with_capacity(resolutions.len());
    let mut spectral = 0.0;
    for cfg in resolutions {
        let sy = stft(y, cfg)?;
        let sh = stft(y_hat, cfg)?;
        let (my, mh) = (sy.magnitude(), sh.magnitude());
        let sc = sc_from_mags(&my, &mh)?;
        let mag = mag_from_mags(&my, &mh, len);
        spectral += sc + mag;
        per.push(ResolutionLoss {
            config: *cfg,
            sc,
            mag,
        });

        if want_grad && beta > 0.0 {
            let num = frobenius(&my, &mh);
            let den = sqrt(my.iter().map(|v| v * v).sum());
            let mut g_re = vec![0.0; mh.len()];
            let mut g_im = vec![0.0; mh.len()];
            for j in 0..mh.len() {
                let m = mh[j];
                if m == 0.0 {
                    continue;
                }
                let mut gm = 0.0;
                if num > 0.0 {
                    gm += (m - my[j]) / (num * den);
                }
                if m > MAG_FLOOR {
                    gm += sign(log(m) - log(my[j].max(MAG_FLOOR))) / (m * len as f64);
                }
                g_re[j] = beta * gm * sh.re[j] / m;
                g_im[j] = beta * gm * sh.im[j] / m;
            }
            let back = stft_adjoint(&g_re, &g_im, len, cfg);
            grad.iter_mut().zip(&back).for_each(|(g, b)| *g += b);
        }
    }
    let total = l1v + beta * spectral;
    if !total.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    Ok((
        LossReport {
            l1: l1v,
            resolutions: per,
            stft_weight: beta,
            total,
        },
        grad,
    ))
}

/// Signs of every absolute-value term of the loss at one point. Evaluating
/// [`branch_loss`] with them follows a single smooth piece of the loss,
/// which finite differences can probe without stepping across a kink.
#[derive(Clone, Debug, PartialEq)]
pub struct LossBranch {
    l1: Vec<f64>,
    mag: Vec<Vec<f64>>,
}

impl LossBranch {
    pub fn at(y: &[f64], y_hat: &[f64], resolutions: &[StftConfig]) -> Result<Self> {
        check_pair(y, y_hat)?;
        let l1 = y.iter().zip(y_hat).map(|(a, b)| sign(b - a)).collect();
        let mut mag = Vec::with_capacity(resolutions.len());
        for cfg in resolutions {
            let (my, mh) = (stft_mag(y, cfg)?, stft_mag(y_hat, cfg)?);
            mag.push(
                my.iter()
                    .zip(&mh)
                    .map(|(a, b)| sign(log(b.max(MAG_FLOOR)) - log(a.max(MAG_FLOOR))))
                    .collect(),
            );
        }
        Ok(Self { l1, mag })
    }
}

/// The total loss with every `|·|` replaced by its sign at `branch`. Equal
/// to [`total_loss`] wherever the signs still hold.
pub fn branch_loss(
    y: &[f64],
    y_hat: &[f64],
    beta: f64,
    resolutions: &[StftConfig],
    branch: &LossBranch,
) -> Result<f64> {
    check_pair(y, y_hat)?;
    if branch.l1.len() != y.len() || branch.mag.len() != resolutions.len() {
        return Err(Error::shape("branch does not match the signals"));
    }
    let len = y.len() as f64;
    let l1: f64 = y
        .iter()
        .zip(y_hat)
        .zip(&branch.l1)
        .map(|((a, b), s)| s * (b - a))
        .sum::<f64>()
        / len;
    let mut spectral = 0.0;
    for (cfg, signs) in resolutions.iter().zip(&branch.mag) {
        let (my, mh) = (stft_mag(y, cfg)?, stft_mag(y_hat, cfg)?);
        spectral += sc_from_mags(&my, &mh)?;
        let m: f64 = my
            .iter()
            .zip(&mh)
            .zip(signs)
            .map(|((a, b), s)| s * (log(b.max(MAG_FLOOR)) - log(a.max(MAG_FLOOR))))
            .sum();
        spectral += m / len;
    }
    Ok(l1 + beta * spectral)
}
