//! The encoder / LSTM / decoder network with skip sums, input normalization
//! and resampling around it.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::{sqrt, std_dev};
use crate::resample::{self, Direction, SincFilter};
use crate::tensor::{
    conv1d, conv_transpose1d, glu, linear, lstm_forward, relu, ConvSpec, LstmSpec, LstmState,
    LstmWeights, Tensor,
};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DemucsConfig {
    /// Number of encoder (and decoder) layers, `L`.
    pub depth: usize,
    /// Channels of the first encoder layer, `H`.
    pub hidden: usize,
    pub kernel: usize,
    pub stride: usize,
    /// Resampling factor `U` applied around the network.
    pub resample: usize,
    pub causal: bool,
    pub normalize: bool,
    /// Lower bound on the standard deviation used for normalization.
    pub floor: f64,
    pub sample_rate: u32,
}

impl Default for DemucsConfig {
    fn default() -> Self {
        Self::reference(64)
    }
}

impl DemucsConfig {
    /// The real-time causal model: `L=5, K=8, S=4, U=4` at 16 kHz.
    pub fn reference(hidden: usize) -> Self {
        Self {
            depth: 5,
            hidden,
            kernel: 8,
            stride: 4,
            resample: 4,
            causal: true,
            normalize: true,
            floor: 1e-3,
            sample_rate: 16_000,
        }
    }

    /// `L=2, H=4, K=8, S=4, U=1`, small enough for finite differences.
    pub fn toy() -> Self {
        Self {
            depth: 2,
            hidden: 4,
            resample: 1,
            ..Self::reference(4)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.depth == 0 || self.hidden == 0 || self.kernel == 0 || self.stride == 0 {
            return bad(format!(
                "depth, hidden, kernel and stride must be positive: {self:?}"
            ));
        }
        if self.kernel < self.stride {
            return bad(format!(
                "kernel {} is smaller than stride {}",
                self.kernel, self.stride
            ));
        }
        if !matches!(self.resample, 1 | 2 | 4) {
            return Err(Error::UnsupportedFactor(self.resample));
        }
        let Some(top) = self.stride.checked_pow(self.depth as u32) else {
            return bad(String::from("stride^depth overflows"));
        };
        if (self.hidden as u128) << (self.depth - 1) > u32::MAX as u128 {
            return bad(String::from("channel count overflows"));
        }
        if top % self.resample != 0 {
            return bad(format!(
                "stride^depth = {top} is not divisible by resample {}",
                self.resample
            ));
        }
        if self.receptive_field() % self.resample != 0 {
            return bad(format!(
                "receptive field {} is not divisible by resample {}",
                self.receptive_field(),
                self.resample
            ));
        }
        if !(self.floor > 0.0 && self.floor.is_finite()) {
            return bad(format!("floor must be positive, got {}", self.floor));
        }
        if self.sample_rate == 0 {
            return bad(String::from("sample rate must be positive"));
        }
        Ok(())
    }

    /// Input channels of encoder layer `i` (0-based).
    pub fn encoder_in(&self, i: usize) -> usize {
        if i == 0 {
            1
        } else {
            self.hidden << (i - 1)
        }
    }

    /// Output channels of encoder layer `i`, which is also the input width of
    /// decoder layer `i`.
    pub fn encoder_out(&self, i: usize) -> usize {
        self.hidden << i
    }

    /// Output channels of decoder layer `i`.
    pub fn decoder_out(&self, i: usize) -> usize {
        self.encoder_in(i)
    }

    pub fn lstm_hidden(&self) -> usize {
        self.hidden << (self.depth - 1)
    }

    pub fn lstm_spec(&self) -> LstmSpec {
        LstmSpec {
            layers: 2,
            hidden: self.lstm_hidden(),
            bidirectional: !self.causal,
        }
    }

    pub fn conv_spec(&self, i: usize) -> ConvSpec {
        ConvSpec::new(
            self.encoder_in(i),
            self.encoder_out(i),
            self.kernel,
            self.stride,
        )
    }

    pub fn conv_transpose_spec(&self, i: usize) -> ConvSpec {
        ConvSpec::new(
            self.encoder_out(i),
            self.decoder_out(i),
            self.kernel,
            self.stride,
        )
    }

    /// `S^L`: upsampled samples per bottleneck step.
    pub fn total_stride(&self) -> usize {
        self.stride.pow(self.depth as u32)
    }

    /// Input samples per bottleneck step, `S^L / U`.
    pub fn hop(&self) -> usize {
        self.total_stride() / self.resample
    }

    /// Upsampled samples read by one bottleneck step,
    /// `1 + (K − 1)(S^L − 1)/(S − 1)`.
    pub fn receptive_field(&self) -> usize {
        let mut r = 1;
        for _ in 0..self.depth {
            r = (r - 1) * self.stride + self.kernel;
        }
        r
    }

    /// Input samples read by one bottleneck step.
    pub fn frame(&self) -> usize {
        self.receptive_field() / self.resample
    }

    /// Smallest length `≥ t` that every layer consumes without remainder.
    pub fn valid_length(&self, t: usize) -> usize {
        let (f, s) = (self.frame(), self.hop());
        if t <= f {
            f
        } else {
            f + (t - f).div_ceil(s) * s
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderLayer {
    pub conv_w: Tensor,
    pub conv_b: Tensor,
    pub rewire_w: Tensor,
    pub rewire_b: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderLayer {
    pub rewire_w: Tensor,
    pub rewire_b: Tensor,
    pub conv_tr_w: Tensor,
    pub conv_tr_b: Tensor,
}

/// All learned weights. `decoder[i]` mirrors `encoder[i]`, so the decoder
/// runs from index `L − 1` down to 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub encoder: Vec<EncoderLayer>,
    pub decoder: Vec<DecoderLayer>,
    pub lstm: LstmWeights,
    /// `[hidden, 2 * hidden, 1]` weight and its bias; bidirectional only.
    pub merge: Option<(Tensor, Tensor)>,
}

impl ModelParams {
    pub fn zeros(config: &DemucsConfig) -> Result<Self> {
        config.validate()?;
        let k = config.kernel;
        let encoder = (0..config.depth)
            .map(|i| {
                let (ci, co) = (config.encoder_in(i), config.encoder_out(i));
                EncoderLayer {
                    conv_w: Tensor::zeros([co, ci, k]),
                    conv_b: Tensor::zeros([1, 1, co]),
                    rewire_w: Tensor::zeros([2 * co, co, 1]),
                    rewire_b: Tensor::zeros([1, 1, 2 * co]),
                }
            })
            .collect();
        let decoder = (0..config.depth)
            .map(|i| {
                let (c, co) = (config.encoder_out(i), config.decoder_out(i));
                DecoderLayer {
                    rewire_w: Tensor::zeros([2 * c, c, 1]),
                    rewire_b: Tensor::zeros([1, 1, 2 * c]),
                    conv_tr_w: Tensor::zeros([c, co, k]),
                    conv_tr_b: Tensor::zeros([1, 1, co]),
                }
            })
            .collect();
        let spec = config.lstm_spec();
        let h = spec.hidden;
        let merge =
            (!config.causal).then(|| (Tensor::zeros([h, 2 * h, 1]), Tensor::zeros([1, 1, h])));
        Ok(Self {
            encoder,
            decoder,
            lstm: LstmWeights::zeros(&spec),
            merge,
        })
    }

    /// Every tensor with its name, in storage order.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, e) in self.encoder.iter().enumerate() {
            out.push((format!("encoder.{i}.conv.weight"), &e.conv_w));
            out.push((format!("encoder.{i}.conv.bias"), &e.conv_b));
            out.push((format!("encoder.{i}.rewire.weight"), &e.rewire_w));
            out.push((format!("encoder.{i}.rewire.bias"), &e.rewire_b));
        }
        for (l, w) in self.lstm.forward.iter().enumerate() {
            out.push((format!("lstm.{l}.w_ih"), &w.w_ih));
            out.push((format!("lstm.{l}.w_hh"), &w.w_hh));
            out.push((format!("lstm.{l}.bias"), &w.bias));
        }
        for (l, w) in self.lstm.backward.iter().enumerate() {
            out.push((format!("lstm.{l}.reverse.w_ih"), &w.w_ih));
            out.push((format!("lstm.{l}.reverse.w_hh"), &w.w_hh));
            out.push((format!("lstm.{l}.reverse.bias"), &w.bias));
        }
        if let Some((w, b)) = &self.merge {
            out.push((String::from("merge.weight"), w));
            out.push((String::from("merge.bias"), b));
        }
        for (i, d) in self.decoder.iter().enumerate() {
            out.push((format!("decoder.{i}.rewire.weight"), &d.rewire_w));
            out.push((format!("decoder.{i}.rewire.bias"), &d.rewire_b));
            out.push((format!("decoder.{i}.conv_tr.weight"), &d.conv_tr_w));
            out.push((format!("decoder.{i}.conv_tr.bias"), &d.conv_tr_b));
        }
        out
    }

    /// Mutable twin of [`ModelParams::named`], same order.
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        for e in &mut self.encoder {
            out.extend([
                &mut e.conv_w,
                &mut e.conv_b,
                &mut e.rewire_w,
                &mut e.rewire_b,
            ]);
        }
        for w in self
            .lstm
            .forward
            .iter_mut()
            .chain(self.lstm.backward.iter_mut())
        {
            out.extend([&mut w.w_ih, &mut w.w_hh, &mut w.bias]);
        }
        if let Some((w, b)) = &mut self.merge {
            out.extend([w, b]);
        }
        for d in &mut self.decoder {
            out.extend([
                &mut d.rewire_w,
                &mut d.rewire_b,
                &mut d.conv_tr_w,
                &mut d.conv_tr_b,
            ]);
        }
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.named().iter().map(|(_, t)| t.numel()).sum()
    }

    /// Names and shapes every tensor must have for `config`.
    pub fn manifest(config: &DemucsConfig) -> Result<Vec<(String, [usize; 3])>> {
        Ok(Self::zeros(config)?
            .named()
            .into_iter()
            .map(|(n, t)| (n, t.shape()))
            .collect())
    }

    /// Verifies that every tensor has the shape `config` requires.
    pub fn check(&self, config: &DemucsConfig) -> Result<()> {
        let expected = Self::manifest(config)?;
        let actual = self.named();
        if expected.len() != actual.len() {
            return Err(Error::ParamsMismatch(format!(
                "expected {} tensors, found {}",
                expected.len(),
                actual.len()
            )));
        }
        for ((name, shape), (got_name, t)) in expected.iter().zip(&actual) {
            if name != got_name || *shape != t.shape() {
                return Err(Error::ParamsMismatch(format!(
                    "{got_name} has shape {:?}, {name} needs {shape:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }
}

/// Fan-in of a weight tensor, `None` for biases (which stay zero).
fn fan_in(name: &str, shape: [usize; 3]) -> Option<usize> {
    if name.ends_with("bias") {
        None
    } else if name.starts_with("lstm") {
        // per gate block: rows of W_ih / W_hh read `input` / `hidden` values
        Some(shape[2])
    } else {
        Some(shape[1] * shape[2])
    }
}

/// Uniform on `±sqrt(6 / fan_in)` for every weight, zero biases.
/// Values are drawn in single precision so that they survive a round trip
/// through the 32-bit weight file unchanged.
pub fn init_params(config: &DemucsConfig, seed: u64) -> Result<ModelParams> {
    let mut params = ModelParams::zeros(config)?;
    let names: Vec<(String, [usize; 3])> = params
        .named()
        .into_iter()
        .map(|(n, t)| (n, t.shape()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for ((name, shape), t) in names.iter().zip(params.tensors_mut()) {
        if let Some(fan) = fan_in(name, *shape) {
            let bound = sqrt(6.0 / fan as f64) as f32;
            for v in t.data_mut() {
                *v = f64::from(rng.random_range(-bound..bound));
            }
        }
    }
    Ok(params)
}

/// Encoder layer `i`: conv(K, S) → ReLU → 1×1 conv to twice the channels → GLU.
pub fn encoder_layer(
    params: &ModelParams,
    config: &DemucsConfig,
    i: usize,
    x: &Tensor,
) -> Result<Tensor> {
    let e = &params.encoder[i];
    let h = relu(&conv1d(
        x,
        &e.conv_w,
        Some(&e.conv_b),
        &config.conv_spec(i),
    )?);
    glu(&linear(&h, &e.rewire_w, Some(&e.rewire_b))?)
}

/// The pointwise half of decoder layer `i`: 1×1 conv → GLU.
pub fn decoder_rewire(params: &ModelParams, i: usize, x: &Tensor) -> Result<Tensor> {
    let d = &params.decoder[i];
    glu(&linear(x, &d.rewire_w, Some(&d.rewire_b))?)
}

/// Decoder layer `i`: 1×1 conv → GLU → transposed conv, then ReLU on every
/// layer except the last one applied (`i == 0`).
pub fn decoder_layer(
    params: &ModelParams,
    config: &DemucsConfig,
    i: usize,
    x: &Tensor,
) -> Result<Tensor> {
    let d = &params.decoder[i];
    let h = decoder_rewire(params, i, x)?;
    let y = conv_transpose1d(
        &h,
        &d.conv_tr_w,
        Some(&d.conv_tr_b),
        &config.conv_transpose_spec(i),
    )?;
    Ok(if i > 0 { relu(&y) } else { y })
}

/// `LSTM(z) + z`, with the merge layer in the bidirectional case.
pub fn bottleneck(
    params: &ModelParams,
    config: &DemucsConfig,
    z: &Tensor,
    state: Option<&LstmState>,
) -> Result<(Tensor, LstmState)> {
    let spec = config.lstm_spec();
    let (mut y, state) = lstm_forward(z, &params.lstm, &spec, state)?;
    if let Some((w, b)) = &params.merge {
        y = linear(&y, w, Some(b))?;
    }
    Ok((y.add(z)?, state))
}

/// The network without normalization: zero-pad to the valid length,
/// upsample, encode, bottleneck, decode with skip sums, downsample, trim.
pub fn network(params: &ModelParams, config: &DemucsConfig, x: &Tensor) -> Result<Tensor> {
    config.validate()?;
    if x.channels() != 1 {
        return Err(Error::shape(format!(
            "expected mono input, got {} channels",
            x.channels()
        )));
    }
    params.check(config)?;
    let t = x.time();
    if t == 0 {
        return Ok(x.clone());
    }
    let filter = SincFilter::default();
    let padded = x.pad_time(config.valid_length(t));
    let mut h = resample::resample_factor(&padded, config.resample, Direction::Up, &filter)?;

    let mut skips = Vec::with_capacity(config.depth);
    for i in 0..config.depth {
        h = encoder_layer(params, config, i, &h)?;
        skips.push(h.clone());
    }
    let (mut h, _) = bottleneck(params, config, &h, None)?;
    for i in (0..config.depth).rev() {
        h = h.add_truncated(&skips[i])?;
        h = decoder_layer(params, config, i, &h)?;
    }
    let y = resample::resample_factor(&h, config.resample, Direction::Down, &filter)?;
    y.narrow_time(0, t)
}

/// Per-item normalization scale `max(std(x), floor)`.
pub fn input_scale(config: &DemucsConfig, x: &Tensor) -> Vec<f64> {
    (0..x.batch())
        .map(|b| {
            if config.normalize {
                std_dev(x.item(b)).max(config.floor)
            } else {
                1.0
            }
        })
        .collect()
}

/// Offline enhancement of `[B, 1, T]`; output has the same shape.
pub fn forward(params: &ModelParams, config: &DemucsConfig, x: &Tensor) -> Result<Tensor> {
    let scale = input_scale(config, x);
    let mut xn = x.clone();
    for (b, d) in scale.iter().enumerate() {
        xn.item_mut(b).iter_mut().for_each(|v| *v /= d);
    }
    let mut y = network(params, config, &xn)?;
    for (b, d) in scale.iter().enumerate() {
        y.item_mut(b).iter_mut().for_each(|v| *v *= d);
    }
    Ok(y)
}

/// `dry · x + (1 − dry) · ŷ`.
pub fn drywet(x: &Tensor, y_hat: &Tensor, dry: f64) -> Result<Tensor> {
    if !(0.0..=1.0).contains(&dry) {
        return Err(Error::InvalidArgument(format!(
            "dry must lie in [0, 1], got {dry}"
        )));
    }
    if x.shape() != y_hat.shape() {
        return Err(Error::shape("drywet: shapes differ"));
    }
    let data = x
        .data()
        .iter()
        .zip(y_hat.data())
        .map(|(a, b)| dry * a + (1.0 - dry) * b)
        .collect();
    Tensor::new(x.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{max_abs_diff, rel_l2};
    use alloc::vec;
    use proptest::prelude::{prop_assert_eq, proptest, ProptestConfig};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn reference_geometry() {
        let c = DemucsConfig::reference(64);
        c.validate().unwrap();
        assert_eq!(c.receptive_field(), 2388);
        assert_eq!(c.frame(), 597);
        assert_eq!(c.hop(), 256);
        assert_eq!(c.lstm_hidden(), 1024);
        let ladder: Vec<usize> = (0..5).map(|i| c.encoder_out(i)).collect();
        assert_eq!(ladder, vec![64, 128, 256, 512, 1024]);
    }

    #[test]
    fn invalid_configs_are_refused() {
        let base = DemucsConfig::toy();
        assert!(DemucsConfig {
            resample: 3,
            ..base
        }
        .validate()
        .is_err());
        assert!(DemucsConfig { depth: 0, ..base }.validate().is_err());
        assert!(DemucsConfig { kernel: 2, ..base }.validate().is_err());
        assert!(DemucsConfig { floor: 0.0, ..base }.validate().is_err());
        // S^L = 4, U = 4, but R = 8 + ... check divisibility of the frame
        assert!(DemucsConfig {
            depth: 1,
            kernel: 6,
            resample: 4,
            ..base
        }
        .validate()
        .is_err());
        assert!(init_params(
            &DemucsConfig {
                resample: 3,
                ..base
            },
            0
        )
        .is_err());
    }

    #[test]
    fn channel_bookkeeping() {
        for depth in 1..6 {
            for hidden in [1, 3, 4, 48] {
                let c = DemucsConfig {
                    depth,
                    hidden,
                    resample: 1,
                    ..DemucsConfig::toy()
                };
                let p = ModelParams::zeros(&c).unwrap();
                for i in 0..depth {
                    assert_eq!(p.decoder[i].rewire_w.shape()[1], c.encoder_out(i));
                    assert_eq!(p.encoder[i].conv_w.shape()[0], c.encoder_out(i));
                    assert_eq!(p.decoder[i].conv_tr_w.shape()[1], c.encoder_in(i));
                }
                p.check(&c).unwrap();
            }
        }
    }

    #[test]
    fn init_is_deterministic_and_seeded() {
        let c = DemucsConfig::toy();
        assert_eq!(init_params(&c, 3).unwrap(), init_params(&c, 3).unwrap());
        assert_ne!(init_params(&c, 3).unwrap(), init_params(&c, 4).unwrap());
    }

    #[test]
    fn init_variance_matches_uniform_law() {
        let c = DemucsConfig {
            hidden: 32,
            ..DemucsConfig::toy()
        };
        let p = init_params(&c, 11).unwrap();
        for (name, t) in p.named() {
            if let Some(fan) = fan_in(&name, t.shape()) {
                if t.numel() < 2000 {
                    continue;
                }
                let var = t.data().iter().map(|v| v * v).sum::<f64>() / t.numel() as f64;
                let expected = 2.0 / fan as f64;
                assert!(
                    (var / expected - 1.0).abs() < 0.2,
                    "{name}: {var} vs {expected}"
                );
            } else {
                assert!(t.data().iter().all(|&v| v == 0.0), "{name}");
            }
        }
    }

    #[test]
    fn valid_length_properties() {
        let c = DemucsConfig::reference(48);
        assert_eq!(c.valid_length(1), 597);
        assert_eq!(c.valid_length(598), 853);
        for t in [1, 100, 597, 598, 5000, 16_000] {
            let v = c.valid_length(t);
            assert!(v >= t);
            assert_eq!(c.valid_length(v), v);
            assert_eq!((v - c.frame()) % c.hop(), 0);
        }
    }

    #[test]
    fn output_length_equals_input_length() {
        let c = DemucsConfig::toy();
        let p = init_params(&c, 0).unwrap();
        for t in [1, 7, 36, 37, 100, 333] {
            let y = forward(&p, &c, &Tensor::from_signal(&noise(t, t as u64))).unwrap();
            assert_eq!(y.shape(), [1, 1, t]);
        }
        let y = forward(&p, &c, &Tensor::from_signal(&[])).unwrap();
        assert_eq!(y.time(), 0);
    }

    #[test]
    fn zero_in_zero_out() {
        let c = DemucsConfig {
            resample: 2,
            ..DemucsConfig::toy()
        };
        let p = init_params(&c, 1).unwrap();
        let y = forward(&p, &c, &Tensor::zeros([2, 1, 300])).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_mono_and_mismatched_params_are_refused() {
        let c = DemucsConfig::toy();
        let p = init_params(&c, 1).unwrap();
        assert!(forward(&p, &c, &Tensor::zeros([1, 2, 50])).is_err());
        let other = DemucsConfig { hidden: 8, ..c };
        assert!(matches!(
            forward(&p, &other, &Tensor::zeros([1, 1, 50])),
            Err(Error::ParamsMismatch(_))
        ));
    }

    #[test]
    fn scale_equivariance() {
        let c = DemucsConfig {
            resample: 2,
            ..DemucsConfig::toy()
        };
        let p = init_params(&c, 5).unwrap();
        let x = Tensor::from_signal(&noise(400, 9));
        let y = forward(&p, &c, &x).unwrap();
        for alpha in [0.5, 3.0, 20.0] {
            let ya = forward(&p, &c, &x.scale(alpha)).unwrap();
            assert!(rel_l2(ya.data(), y.scale(alpha).data()) < 1e-6);
        }
    }

    #[test]
    fn causal_outputs_ignore_the_far_future() {
        let c = DemucsConfig {
            resample: 2,
            ..DemucsConfig::toy()
        };
        let p = init_params(&c, 6).unwrap();
        let cfg = DemucsConfig {
            normalize: false,
            ..c
        };
        let x = noise(600, 1);
        let y = network(&p, &cfg, &Tensor::from_signal(&x)).unwrap();
        let mut x2 = x.clone();
        let cut = 400;
        x2[cut..].iter_mut().for_each(|v| *v = -*v * 3.0);
        let y2 = network(&p, &cfg, &Tensor::from_signal(&x2)).unwrap();
        // encoder look-ahead (K − S per level) plus both sinc footprints
        let horizon = 200;
        assert!(max_abs_diff(&y.data()[..cut - horizon], &y2.data()[..cut - horizon]) < 1e-12);
        assert!(max_abs_diff(y.data(), y2.data()) > 1e-6);
    }

    #[test]
    fn bidirectional_runs_and_sees_the_future() {
        let c = DemucsConfig {
            causal: false,
            ..DemucsConfig::toy()
        };
        let p = init_params(&c, 7).unwrap();
        assert!(p.merge.is_some());
        let x = noise(300, 2);
        let y = forward(&p, &c, &Tensor::from_signal(&x)).unwrap();
        let mut x2 = x.clone();
        x2[299] += 1.0;
        let y2 = forward(&p, &c, &Tensor::from_signal(&x2)).unwrap();
        assert!((y.data()[0] - y2.data()[0]).abs() > 0.0);
    }

    #[test]
    fn drywet_endpoints() {
        let x = Tensor::from_signal(&noise(10, 1));
        let y = Tensor::from_signal(&noise(10, 2));
        assert_eq!(drywet(&x, &y, 1.0).unwrap(), x);
        assert_eq!(drywet(&x, &y, 0.0).unwrap(), y);
        assert!(drywet(&x, &y, 1.5).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn forward_is_deterministic(seed in 0u64..100, t in 1usize..200) {
            let c = DemucsConfig::toy();
            let p = init_params(&c, seed).unwrap();
            let x = Tensor::from_signal(&noise(t, seed));
            prop_assert_eq!(forward(&p, &c, &x).unwrap(), forward(&p, &c, &x).unwrap());
        }
    }
}
