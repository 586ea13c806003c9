//! Windowed-sinc resampling by 2, composed to reach 4.
//!
//! Both directions are fixed linear operators with zero boundaries, so each
//! has an exact adjoint (used by backpropagation) and an exact dependency
//! footprint (used by the stream engine to size its context buffers).

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{cos, sin, PI};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Zero crossings of the sinc kernel on each side.
pub const DEFAULT_ZEROS: usize = 56;

/// Half-band interpolation kernel: `2 * zeros` taps of a Hann-windowed sinc
/// sampled at half-integer offsets, normalized to unit DC gain.
#[derive(Clone, Debug, PartialEq)]
pub struct SincFilter {
    zeros: usize,
    taps: Vec<f64>,
}

impl Default for SincFilter {
    fn default() -> Self {
        Self::new(DEFAULT_ZEROS)
    }
}

impl SincFilter {
    pub fn new(zeros: usize) -> Self {
        assert!(zeros > 0, "sinc filter needs at least one zero crossing");
        let n = 4 * zeros;
        let mut taps: Vec<f64> = (0..2 * zeros)
            .map(|k| {
                let t = (k as f64 - zeros as f64 + 0.5) * PI;
                // odd samples of a (4 zeros + 1)-point symmetric Hann window
                let w = 0.5 - 0.5 * cos(2.0 * PI * (2 * k + 1) as f64 / n as f64);
                sin(t) / t * w
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|v| *v /= sum);
        Self { zeros, taps }
    }

    pub fn zeros(&self) -> usize {
        self.zeros
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }
}

fn check_factor(factor: usize) -> Result<usize> {
    match factor {
        1 => Ok(0),
        2 => Ok(1),
        4 => Ok(2),
        u => Err(Error::UnsupportedFactor(u)),
    }
}

/// Doubles the rate. `y[2i] = x[i]` and `y[2i+1] = Σ_k h[k] x[i+1+k−Z]`.
pub fn upsample2(x: &[f64], f: &SincFilter) -> Vec<f64> {
    let (z, h) = (f.zeros as isize, &f.taps);
    let n = x.len() as isize;
    let mut y = vec![0.0; 2 * x.len()];
    for i in 0..n {
        y[2 * i as usize] = x[i as usize];
        let base = i + 1 - z;
        let lo = (-base).max(0);
        let hi = (n - base).min(h.len() as isize);
        let mut acc = 0.0;
        for k in lo..hi {
            acc += h[k as usize] * x[(base + k) as usize];
        }
        y[2 * i as usize + 1] = acc;
    }
    y
}

/// Adjoint of [`upsample2`]; `g` has even length.
pub fn upsample2_adjoint(g: &[f64], f: &SincFilter) -> Vec<f64> {
    let (z, h) = (f.zeros as isize, &f.taps);
    let n = (g.len() / 2) as isize;
    let mut x = vec![0.0; n as usize];
    for i in 0..n {
        x[i as usize] += g[2 * i as usize];
        let go = g[2 * i as usize + 1];
        let base = i + 1 - z;
        let lo = (-base).max(0);
        let hi = (n - base).min(h.len() as isize);
        for k in lo..hi {
            x[(base + k) as usize] += h[k as usize] * go;
        }
    }
    x
}

/// Halves the rate. An odd-length input is padded with one zero, so the
/// output has `ceil(n / 2)` samples.
/// `y[i] = (x[2i] + Σ_k h[k] x[2(i+k−Z)+1]) / 2`.
pub fn downsample2(x: &[f64], f: &SincFilter) -> Vec<f64> {
    let (z, h) = (f.zeros as isize, &f.taps);
    let m = x.len().div_ceil(2) as isize;
    let odd = |j: isize| -> f64 {
        let idx = 2 * j + 1;
        if j < 0 || idx >= x.len() as isize {
            0.0
        } else {
            x[idx as usize]
        }
    };
    (0..m)
        .map(|i| {
            let base = i - z;
            let lo = (-base).max(0);
            let hi = (m - base).min(h.len() as isize);
            let mut acc = 0.0;
            for k in lo..hi {
                acc += h[k as usize] * odd(base + k);
            }
            0.5 * (x[2 * i as usize] + acc)
        })
        .collect()
}

/// Adjoint of [`downsample2`] for an input of length `n`.
pub fn downsample2_adjoint(g: &[f64], n: usize, f: &SincFilter) -> Vec<f64> {
    let (z, h) = (f.zeros as isize, &f.taps);
    let m = n.div_ceil(2) as isize;
    debug_assert_eq!(g.len() as isize, m);
    let mut x = vec![0.0; n];
    for i in 0..m {
        let gi = 0.5 * g[i as usize];
        x[2 * i as usize] += gi;
        let base = i - z;
        let lo = (-base).max(0);
        let hi = (m - base).min(h.len() as isize);
        for k in lo..hi {
            let idx = 2 * (base + k) + 1;
            if idx < n as isize {
                x[idx as usize] += h[k as usize] * gi;
            }
        }
    }
    x
}

/// Upsamples by `factor ∈ {1, 2, 4}`.
pub fn upsample(x: &[f64], factor: usize, f: &SincFilter) -> Result<Vec<f64>> {
    let stages = check_factor(factor)?;
    let mut y = x.to_vec();
    for _ in 0..stages {
        y = upsample2(&y, f);
    }
    Ok(y)
}

/// Downsamples by `factor ∈ {1, 2, 4}`.
pub fn downsample(x: &[f64], factor: usize, f: &SincFilter) -> Result<Vec<f64>> {
    let stages = check_factor(factor)?;
    let mut y = x.to_vec();
    for _ in 0..stages {
        y = downsample2(&y, f);
    }
    Ok(y)
}

pub fn upsample_adjoint(g: &[f64], factor: usize, f: &SincFilter) -> Result<Vec<f64>> {
    let stages = check_factor(factor)?;
    let mut x = g.to_vec();
    for _ in 0..stages {
        x = upsample2_adjoint(&x, f);
    }
    Ok(x)
}

/// Adjoint of [`downsample`] for an input of length `n`.
pub fn downsample_adjoint(g: &[f64], n: usize, factor: usize, f: &SincFilter) -> Result<Vec<f64>> {
    let stages = check_factor(factor)?;
    // input lengths seen by each stage, outermost first
    let mut lens = Vec::with_capacity(stages);
    let mut len = n;
    for _ in 0..stages {
        lens.push(len);
        len = len.div_ceil(2);
    }
    let mut x = g.to_vec();
    for &l in lens.iter().rev() {
        x = downsample2_adjoint(&x, l, f);
    }
    Ok(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

/// Resamples every row of `x` by `factor`.
pub fn resample_factor(
    x: &Tensor,
    factor: usize,
    direction: Direction,
    f: &SincFilter,
) -> Result<Tensor> {
    check_factor(factor)?;
    let [b, c, t] = x.shape();
    let out_len = match direction {
        Direction::Up => t * factor,
        Direction::Down => down_len(t, factor),
    };
    let mut out = Tensor::zeros([b, c, out_len]);
    for bi in 0..b {
        for ci in 0..c {
            let y = match direction {
                Direction::Up => upsample(x.row(bi, ci), factor, f)?,
                Direction::Down => downsample(x.row(bi, ci), factor, f)?,
            };
            out.row_mut(bi, ci).copy_from_slice(&y);
        }
    }
    Ok(out)
}

/// Output length of [`downsample`].
pub fn down_len(n: usize, factor: usize) -> usize {
    let mut len = n;
    let mut u = factor;
    while u > 1 {
        len = len.div_ceil(2);
        u /= 2;
    }
    len
}

// Dependency footprints. "need" maps a prefix of outputs to the prefix of
// inputs it reads; "first" maps the first output of a suffix to the first
// input it reads. Both are exact, so zero-padded windows that cover them
// reproduce the full-signal result bit for bit.

fn up2_need(n: usize, zeros: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let last_even = (n - 1) & !1;
    let mut need = last_even / 2 + 1;
    if n >= 2 {
        let last_odd = if (n - 1) % 2 == 1 { n - 1 } else { n - 2 };
        need = need.max((last_odd - 1) / 2 + zeros + 1);
    }
    need
}

fn up2_first(j: usize, zeros: usize) -> usize {
    let even = j.div_ceil(2);
    let first_odd = if j % 2 == 1 { j } else { j + 1 };
    even.min(((first_odd - 1) / 2 + 1).saturating_sub(zeros))
}

fn down2_need(m: usize, zeros: usize) -> usize {
    if m == 0 {
        0
    } else {
        2 * m + 2 * zeros - 2
    }
}

fn down2_first(i: usize, zeros: usize) -> usize {
    (2 * i + 1).saturating_sub(2 * zeros)
}

fn stages(factor: usize) -> usize {
    check_factor(factor).expect("factor validated by the caller")
}

/// Base-rate samples needed to compute the first `n` upsampled samples.
pub fn upsample_need(n: usize, factor: usize, f: &SincFilter) -> usize {
    (0..stages(factor)).fold(n, |acc, _| up2_need(acc, f.zeros))
}

/// First base-rate sample that upsampled sample `j` (or any later one) reads.
pub fn upsample_first(j: usize, factor: usize, f: &SincFilter) -> usize {
    (0..stages(factor)).fold(j, |acc, _| up2_first(acc, f.zeros))
}

/// High-rate samples needed to compute the first `m` downsampled samples.
pub fn downsample_need(m: usize, factor: usize, f: &SincFilter) -> usize {
    (0..stages(factor)).fold(m, |acc, _| down2_need(acc, f.zeros))
}

/// First high-rate sample that downsampled sample `i` (or any later one) reads.
pub fn downsample_first(i: usize, factor: usize, f: &SincFilter) -> usize {
    (0..stages(factor)).fold(i, |acc, _| down2_first(acc, f.zeros))
}
