//! Frame-by-frame causal inference.
//!
//! Every stride of input advances the bottleneck by one step. Each encoder
//! layer keeps the last `K − S` inputs it has not fully consumed, the LSTM
//! carries its state, each decoder layer keeps the overlap-add remainder of
//! its transposed convolution, and the resamplers recompute a short
//! zero-padded window around the new samples. Processing is driven by an
//! internal step schedule, so the output never depends on how the input was
//! chunked.
//!
//! Normalization uses the standard deviation of everything received so far
//! (including the current sample). The equivalent offline computation is
//! `d ⊙ network(x ⊘ d)` with `d` that running sequence.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{ceil, sqrt};
use crate::model::{self, DemucsConfig, ModelParams};
use crate::resample::{self, SincFilter};
use crate::tensor::{conv_transpose1d, relu, ConvSpec, LstmState, Tensor};
use crate::{Error, Result};

/// How far the engine looks past the model frame before running a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Lookahead {
    /// 3 ms of lookahead. The resamplers see zeros past it and the
    /// downsampler is padded with the provisional tail of the decoder, so
    /// frames are emitted one stride after they start, at a small accuracy
    /// cost.
    #[default]
    Paper,
    /// Enough lookahead and emission delay for every resampler tap to see
    /// real data. Output equals the offline forward pass.
    Exact,
}

/// Frame geometry in input samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamGeometry {
    pub sample_rate: u32,
    /// Input samples per step.
    pub stride: usize,
    /// Input samples the model reads for one step.
    pub model_frame: usize,
    pub lookahead: usize,
    /// Samples between the end of a step's output window and the last
    /// sample it emits.
    pub emission_delay: usize,
}

impl StreamGeometry {
    pub fn new(config: &DemucsConfig, mode: Lookahead) -> Result<Self> {
        config.validate()?;
        let filter = SincFilter::default();
        let (lookahead, emission_delay) = match mode {
            Lookahead::Paper => ((config.sample_rate as usize * 3) / 1000, 0),
            Lookahead::Exact => {
                let u = config.resample;
                let look =
                    resample::upsample_need(config.receptive_field(), u, &filter) - config.frame();
                let c = resample::downsample_need(1, u, &filter) - u;
                (look, c.div_ceil(u))
            }
        };
        Ok(Self {
            sample_rate: config.sample_rate,
            stride: config.hop(),
            model_frame: config.frame(),
            lookahead,
            emission_delay,
        })
    }

    /// Model frame plus lookahead: the input needed before the first step.
    pub fn total_frame(&self) -> usize {
        self.model_frame + self.lookahead
    }

    /// Most future input any output sample depends on.
    pub fn horizon(&self) -> usize {
        self.model_frame + self.lookahead + self.emission_delay - self.stride
    }

    /// Whole milliseconds covered by `samples` (rounded down).
    pub fn ms(&self, samples: usize) -> usize {
        samples * 1000 / self.sample_rate as usize
    }

    pub fn seconds(&self, samples: usize) -> f64 {
        samples as f64 / f64::from(self.sample_rate)
    }
}

/// A multi-channel series of which only a suffix is retained.
#[derive(Clone, Debug)]
struct Track {
    start: usize,
    rows: Vec<Vec<f64>>,
}

impl Track {
    fn new(channels: usize) -> Self {
        Self {
            start: 0,
            rows: vec![Vec::new(); channels],
        }
    }

    fn end(&self) -> usize {
        self.start + self.rows[0].len()
    }

    fn append(&mut self, t: &Tensor) {
        for (c, row) in self.rows.iter_mut().enumerate() {
            row.extend_from_slice(t.row(0, c));
        }
    }

    fn slice(&self, a: usize, b: usize) -> Tensor {
        debug_assert!(a >= self.start && b <= self.end() && a <= b);
        let mut out = Tensor::zeros([1, self.rows.len(), b - a]);
        for (c, row) in self.rows.iter().enumerate() {
            out.row_mut(0, c)
                .copy_from_slice(&row[a - self.start..b - self.start]);
        }
        out
    }

    /// Adds `t` starting at absolute position `at`, growing with zeros.
    fn accumulate(&mut self, at: usize, t: &Tensor) {
        let end = at + t.time();
        for (c, row) in self.rows.iter_mut().enumerate() {
            if row.len() < end - self.start {
                row.resize(end - self.start, 0.0);
            }
            for (dst, src) in row[at - self.start..].iter_mut().zip(t.row(0, c)) {
                *dst += src;
            }
        }
    }

    fn drop_before(&mut self, a: usize) {
        let n = a.saturating_sub(self.start).min(self.rows[0].len());
        for row in &mut self.rows {
            row.drain(..n);
        }
        self.start += n;
    }

    /// Mono value at `i`, zero outside the retained range.
    fn at(&self, i: usize) -> f64 {
        if i >= self.start && i < self.end() {
            self.rows[0][i - self.start]
        } else {
            0.0
        }
    }
}

/// Incremental inference state for one mono stream.
#[derive(Clone, Debug)]
pub struct StreamState<'a> {
    params: &'a ModelParams,
    config: DemucsConfig,
    mode: Lookahead,
    geometry: StreamGeometry,
    dry: f64,
    filter: SincFilter,

    // running moments (Welford)
    count: usize,
    mean: f64,
    m2: f64,

    raw: Track,
    scale: Track,
    normed: Track,
    /// Upsampled input samples produced so far.
    up_done: usize,
    /// Input of encoder layer `i` (layer 0 reads the upsampled signal).
    enc_in: Vec<Track>,
    enc_done: Vec<usize>,
    /// Outputs of encoder layer `i`, waiting for decoder layer `i`.
    skips: Vec<Track>,
    lstm: LstmState,
    /// Overlap-add accumulator of decoder layer `i` (bias not yet added).
    acc: Vec<Track>,
    /// Inputs decoder layer `i` has consumed.
    dec_done: Vec<usize>,
    /// Finished decoder output at the upsampled rate.
    dec_out: Track,
    steps: usize,
    emitted: usize,
    /// Zero-padded input length, known once the stream is flushed. The
    /// resamplers stop there, as they do on a finite signal.
    end: Option<usize>,
    closed: bool,
}

impl<'a> StreamState<'a> {
    pub fn new(
        params: &'a ModelParams,
        config: &DemucsConfig,
        dry: f64,
        mode: Lookahead,
    ) -> Result<Self> {
        config.validate()?;
        if !config.causal {
            return Err(Error::NonCausal);
        }
        if !(0.0..=1.0).contains(&dry) {
            return Err(Error::InvalidArgument(alloc::format!(
                "dry must lie in [0, 1], got {dry}"
            )));
        }
        params.check(config)?;
        let depth = config.depth;
        Ok(Self {
            params,
            config: *config,
            mode,
            geometry: StreamGeometry::new(config, mode)?,
            dry,
            filter: SincFilter::default(),
            count: 0,
            mean: 0.0,
            m2: 0.0,
            raw: Track::new(1),
            scale: Track::new(1),
            normed: Track::new(1),
            up_done: 0,
            enc_in: (0..depth)
                .map(|i| Track::new(config.encoder_in(i)))
                .collect(),
            enc_done: vec![0; depth],
            skips: (0..depth)
                .map(|i| Track::new(config.encoder_out(i)))
                .collect(),
            lstm: LstmState::zeros(&config.lstm_spec(), 1),
            acc: (0..depth)
                .map(|i| Track::new(config.decoder_out(i)))
                .collect(),
            dec_done: vec![0; depth],
            dec_out: Track::new(1),
            steps: 0,
            emitted: 0,
            end: None,
            closed: false,
        })
    }

    pub fn geometry(&self) -> StreamGeometry {
        self.geometry
    }

    pub fn frames_processed(&self) -> usize {
        self.steps
    }

    pub fn received(&self) -> usize {
        self.count
    }

    pub fn emitted(&self) -> usize {
        self.emitted
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Sample count, running mean and running standard deviation.
    pub fn moments(&self) -> (usize, f64, f64) {
        let std = if self.count == 0 {
            0.0
        } else {
            sqrt(self.m2 / self.count as f64)
        };
        (self.count, self.mean, std)
    }

    fn threshold(&self, k: usize) -> usize {
        self.geometry.model_frame + k * self.geometry.stride + self.geometry.lookahead
    }

    /// Feeds any number of samples and returns whatever became final.
    pub fn push(&mut self, samples: &[f64]) -> Result<Vec<f64>> {
        if self.closed {
            return Err(Error::StreamClosed);
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("stream input"));
        }
        for &x in samples {
            self.count += 1;
            let delta = x - self.mean;
            self.mean += delta / self.count as f64;
            self.m2 += delta * (x - self.mean);
            let d = if self.config.normalize {
                sqrt(self.m2 / self.count as f64).max(self.config.floor)
            } else {
                1.0
            };
            self.raw.rows[0].push(x);
            self.scale.rows[0].push(d);
            self.normed.rows[0].push(x / d);
        }
        let mut out = Vec::new();
        while self.count >= self.threshold(self.steps) {
            self.step()?;
            let target = match self.mode {
                Lookahead::Paper => self.steps * self.geometry.stride,
                Lookahead::Exact => {
                    (self.steps * self.geometry.stride).saturating_sub(self.geometry.emission_delay)
                }
            };
            let provisional = match self.mode {
                Lookahead::Paper => self.cascade()?,
                Lookahead::Exact => Vec::new(),
            };
            out.extend(self.emit(target, &provisional)?);
        }
        Ok(out)
    }

    /// Ends the stream: zero-pads to the offline valid length, runs the
    /// remaining steps, closes every overlap-add tail and returns the rest
    /// of the output. Total output length equals total input length.
    pub fn flush(&mut self) -> Result<Vec<f64>> {
        if self.closed {
            return Err(Error::StreamClosed);
        }
        self.closed = true;
        let t = self.count;
        if t == 0 {
            return Ok(Vec::new());
        }
        let padded = self.config.valid_length(t);
        self.normed.rows[0].resize(padded - self.normed.start, 0.0);
        self.end = Some(padded);
        let last = (padded - self.geometry.model_frame) / self.geometry.stride;
        while self.steps <= last {
            self.step()?;
        }
        let tail = self.cascade()?;
        self.dec_out.rows[0].extend_from_slice(&tail);
        debug_assert_eq!(self.dec_out.end(), padded * self.config.resample);
        self.emit(t, &[])
    }

    /// One bottleneck step `k = self.steps`.
    fn step(&mut self) -> Result<()> {
        let cfg = self.config;
        let (u, s, kern, depth) = (cfg.resample, cfg.stride, cfg.kernel, cfg.depth);
        let k = self.steps;

        // upsample the new input, reading nothing past the lookahead
        let n_up = cfg.receptive_field() + k * cfg.total_stride();
        let a = resample::upsample_first(self.up_done, u, &self.filter).max(self.normed.start);
        let mut b = resample::upsample_need(n_up, u, &self.filter);
        if let Some(end) = self.end {
            b = b.min(end);
        }
        let limit = self.threshold(k).min(self.normed.end());
        let window: Vec<f64> = (a..b)
            .map(|i| if i < limit { self.normed.at(i) } else { 0.0 })
            .collect();
        let up = resample::upsample(&window, u, &self.filter)?;
        let fresh = Tensor::from_signal(&up[self.up_done - a * u..n_up - a * u]);
        self.enc_in[0].append(&fresh);
        self.up_done = n_up;
        let keep = resample::upsample_first(self.up_done, u, &self.filter);
        self.normed.drop_before(keep);

        // encoder
        let mut reach = 1;
        let mut outputs = Vec::with_capacity(depth);
        for _ in 0..depth {
            outputs.push(reach);
            reach = (reach - 1) * s + kern;
        }
        let mut z = Tensor::zeros([1, 1, 0]);
        for i in 0..depth {
            let levels_above = depth - 1 - i;
            let target = k * s.pow(levels_above as u32) + outputs[levels_above];
            let done = self.enc_done[i];
            let x = self.enc_in[i].slice(done * s, (target - 1) * s + kern);
            let y = model::encoder_layer(self.params, &cfg, i, &x)?;
            self.enc_in[i].drop_before(target * s);
            self.enc_done[i] = target;
            self.skips[i].append(&y);
            if i + 1 < depth {
                self.enc_in[i + 1].append(&y);
            } else {
                z = y;
            }
        }
        debug_assert_eq!(z.time(), 1);

        // bottleneck
        let (zhat, state) = model::bottleneck(self.params, &cfg, &z, Some(&self.lstm))?;
        self.lstm = state;

        // decoder
        let mut carry = zhat;
        for i in (0..depth).rev() {
            let d_new = (k + 1) * s.pow((depth - 1 - i) as u32);
            let d_old = self.dec_done[i];
            debug_assert_eq!(carry.time(), d_new - d_old);
            let x = carry.add(&self.skips[i].slice(d_old, d_new))?;
            self.skips[i].drop_before(d_new);
            let contrib = self.contribution(i, &x)?;
            self.acc[i].accumulate(d_old * s, &contrib);
            let fin = self.acc[i].slice(d_old * s, d_new * s);
            self.acc[i].drop_before(d_new * s);
            self.dec_done[i] = d_new;
            carry = self.finish(i, fin);
        }
        self.dec_out.append(&carry);
        self.steps += 1;
        Ok(())
    }

    /// 1×1 conv, GLU and the bias-free transposed convolution of decoder `i`.
    fn contribution(&self, i: usize, x: &Tensor) -> Result<Tensor> {
        let h = model::decoder_rewire(self.params, i, x)?;
        let spec = ConvSpec {
            bias: false,
            ..self.config.conv_transpose_spec(i)
        };
        conv_transpose1d(&h, &self.params.decoder[i].conv_tr_w, None, &spec)
    }

    /// Bias and activation for completed outputs of decoder `i`.
    fn finish(&self, i: usize, mut y: Tensor) -> Tensor {
        let bias = self.params.decoder[i].conv_tr_b.data();
        for (c, beta) in bias.iter().enumerate() {
            y.row_mut(0, c).iter_mut().for_each(|v| *v += beta);
        }
        if i > 0 {
            relu(&y)
        } else {
            y
        }
    }

    /// Completes every decoder tail as if no further input arrived and
    /// returns the upsampled-rate samples past `dec_out`. At end of stream
    /// this is exact; mid-stream it is the provisional "invalid" region.
    fn cascade(&self) -> Result<Vec<f64>> {
        let depth = self.config.depth;
        let mut carry: Option<Tensor> = None;
        for i in (0..depth).rev() {
            let mut acc = self.acc[i].clone();
            if let Some(prov) = carry.take() {
                let d = self.dec_done[i];
                let x = prov.add(&self.skips[i].slice(d, d + prov.time()))?;
                let contrib = self.contribution(i, &x)?;
                acc.accumulate(d * self.config.stride, &contrib);
            }
            let tail = acc.slice(acc.start, acc.end());
            carry = Some(self.finish(i, tail));
        }
        Ok(carry.map(Tensor::into_data).unwrap_or_default())
    }

    /// Downsamples, denormalizes and mixes base-rate outputs up to `target`.
    fn emit(&mut self, target: usize, provisional: &[f64]) -> Result<Vec<f64>> {
        let (e0, e1) = (self.emitted, target);
        if e1 <= e0 {
            return Ok(Vec::new());
        }
        let u = self.config.resample;
        let mut a = resample::downsample_first(e0, u, &self.filter);
        a -= a % u;
        let mut b = resample::downsample_need(e1, u, &self.filter);
        if let Some(end) = self.end {
            b = b.min(end * u);
        }
        let fin_end = self.dec_out.end();
        let window: Vec<f64> = (a..b)
            .map(|i| {
                if i < fin_end {
                    self.dec_out.at(i)
                } else {
                    provisional.get(i - fin_end).copied().unwrap_or(0.0)
                }
            })
            .collect();
        let down = resample::downsample(&window, u, &self.filter)?;
        let net = &down[e0 - a / u..e1 - a / u];
        let dry = self.dry;
        let out: Vec<f64> = net
            .iter()
            .enumerate()
            .map(|(j, y)| {
                let t = e0 + j;
                dry * self.raw.at(t) + (1.0 - dry) * self.scale.at(t) * y
            })
            .collect();
        self.emitted = e1;
        self.raw.drop_before(e1);
        self.scale.drop_before(e1);
        let mut keep = resample::downsample_first(e1, u, &self.filter);
        keep -= keep % u;
        self.dec_out.drop_before(keep);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("stream output"));
        }
        Ok(out)
    }
}

/// Runs a whole signal through a fresh stream in chunks of `chunk` samples
/// (`0` means one chunk).
pub fn stream_signal(
    params: &ModelParams,
    config: &DemucsConfig,
    x: &[f64],
    chunk: usize,
    dry: f64,
    mode: Lookahead,
) -> Result<Vec<f64>> {
    let mut state = StreamState::new(params, config, dry, mode)?;
    let mut out = Vec::with_capacity(x.len());
    if chunk == 0 {
        out.extend(state.push(x)?);
    } else {
        for c in x.chunks(chunk) {
            out.extend(state.push(c)?);
        }
    }
    out.extend(state.flush()?);
    Ok(out)
}

/// The running normalization scale the stream applies to `x`.
pub fn running_scale(config: &DemucsConfig, x: &[f64]) -> Vec<f64> {
    let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
    x.iter()
        .map(|&v| {
            if !config.normalize {
                return 1.0;
            }
            n += 1;
            let delta = v - mean;
            mean += delta / n as f64;
            m2 += delta * (v - mean);
            sqrt(m2 / n as f64).max(config.floor)
        })
        .collect()
}

/// Timing summary of a run; durations are supplied by the caller.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamReport {
    pub frame_size_ms: f64,
    pub model_frame_ms: f64,
    pub stride_ms: f64,
    pub lookahead_ms: f64,
    /// Wall-clock seconds spent on each stride of input.
    pub frame_times: Vec<f64>,
    pub mean_frame_time: f64,
    pub p95_frame_time: f64,
    /// Mean frame time divided by the stride duration.
    pub rtf: f64,
}

impl StreamReport {
    pub fn new(geometry: &StreamGeometry, frame_times: Vec<f64>) -> Self {
        let ms = |n: usize| 1000.0 * geometry.seconds(n);
        let mean = if frame_times.is_empty() {
            0.0
        } else {
            frame_times.iter().sum::<f64>() / frame_times.len() as f64
        };
        let mut sorted = frame_times.clone();
        sorted.sort_by(f64::total_cmp);
        let p95 = if sorted.is_empty() {
            0.0
        } else {
            sorted[(ceil(sorted.len() as f64 * 0.95) as usize).clamp(1, sorted.len()) - 1]
        };
        Self {
            frame_size_ms: ms(geometry.total_frame()),
            model_frame_ms: ms(geometry.model_frame),
            stride_ms: ms(geometry.stride),
            lookahead_ms: ms(geometry.lookahead),
            rtf: mean / geometry.seconds(geometry.stride),
            frame_times,
            mean_frame_time: mean,
            p95_frame_time: p95,
        }
    }
}
