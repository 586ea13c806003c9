use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::Tensor;
use crate::math::{dot, sigmoid, tanh};
use crate::{Error, Result};

/// Gate blocks inside every LSTM weight tensor, in storage order.
pub const GATES: [&str; 4] = ["input", "forget", "cell", "output"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmSpec {
    pub layers: usize,
    pub hidden: usize,
    pub bidirectional: bool,
}

impl LstmSpec {
    pub fn directions(&self) -> usize {
        if self.bidirectional {
            2
        } else {
            1
        }
    }

    /// Input width of `layer`: the first layer sees the bottleneck, deeper
    /// layers see every direction of the layer below.
    pub fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.hidden
        } else {
            self.hidden * self.directions()
        }
    }
}

/// One direction of one layer. `w_ih` is `[4, hidden, input]`, `w_hh` is
/// `[4, hidden, hidden]` and `bias` is `[1, 4, hidden]`, gates in
/// [`GATES`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayerWeights {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub bias: Tensor,
}

impl LstmLayerWeights {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_ih: Tensor::zeros([4, hidden, input]),
            w_hh: Tensor::zeros([4, hidden, hidden]),
            bias: Tensor::zeros([1, 4, hidden]),
        }
    }

    fn check(&self, input: usize, hidden: usize) -> Result<()> {
        if self.w_ih.shape() != [4, hidden, input]
            || self.w_hh.shape() != [4, hidden, hidden]
            || self.bias.shape() != [1, 4, hidden]
        {
            return Err(Error::shape(format!(
                "lstm layer weights do not match input {input}, hidden {hidden}"
            )));
        }
        Ok(())
    }

    /// Pre-activations `W_ih x + W_hh h + b` for one batch item, laid out
    /// gate-major (`4 * hidden` values).
    pub fn preactivations(&self, x: &[f64], h: &[f64], out: &mut [f64]) {
        let hidden = h.len();
        let input = x.len();
        let (wi, wh, b) = (self.w_ih.data(), self.w_hh.data(), self.bias.data());
        for r in 0..4 * hidden {
            out[r] = b[r]
                + dot(&wi[r * input..(r + 1) * input], x)
                + dot(&wh[r * hidden..(r + 1) * hidden], h);
        }
    }
}

/// `forward[layer]` always exists; `backward[layer]` only when bidirectional.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmWeights {
    pub forward: Vec<LstmLayerWeights>,
    pub backward: Vec<LstmLayerWeights>,
}

impl LstmWeights {
    pub fn zeros(spec: &LstmSpec) -> Self {
        let make = |l| LstmLayerWeights::zeros(spec.layer_input(l), spec.hidden);
        Self {
            forward: (0..spec.layers).map(make).collect(),
            backward: if spec.bidirectional {
                (0..spec.layers).map(make).collect()
            } else {
                Vec::new()
            },
        }
    }

    pub fn check(&self, spec: &LstmSpec) -> Result<()> {
        let back = if spec.bidirectional { spec.layers } else { 0 };
        if self.forward.len() != spec.layers || self.backward.len() != back {
            return Err(Error::shape("lstm layer count does not match spec"));
        }
        for (l, w) in self.forward.iter().chain(&self.backward).enumerate() {
            w.check(spec.layer_input(l % spec.layers), spec.hidden)?;
        }
        Ok(())
    }
}

/// Hidden and cell state of every (unidirectional) layer, `[layer][b * hidden + j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub batch: usize,
    pub hidden: usize,
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl LstmState {
    pub fn zeros(spec: &LstmSpec, batch: usize) -> Self {
        let layer = vec![0.0; batch * spec.hidden];
        Self {
            batch,
            hidden: spec.hidden,
            h: vec![layer.clone(); spec.layers],
            c: vec![layer; spec.layers],
        }
    }

    fn check(&self, spec: &LstmSpec, batch: usize) -> Result<()> {
        let ok = self.batch == batch
            && self.hidden == spec.hidden
            && self.h.len() == spec.layers
            && self.c.len() == spec.layers
            && self
                .h
                .iter()
                .chain(&self.c)
                .all(|v| v.len() == batch * spec.hidden);
        if ok {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "lstm state ({} x {} x {}) does not match batch {batch}, spec {spec:?}",
                self.h.len(),
                self.batch,
                self.hidden
            )))
        }
    }
}

/// One cell update in place. `pre` holds the pre-activations and is
/// overwritten with the activated gates.
pub fn cell_step(pre: &mut [f64], h: &mut [f64], c: &mut [f64]) {
    let hd = h.len();
    for j in 0..hd {
        let i = sigmoid(pre[j]);
        let f = sigmoid(pre[hd + j]);
        let g = tanh(pre[2 * hd + j]);
        let o = sigmoid(pre[3 * hd + j]);
        pre[j] = i;
        pre[hd + j] = f;
        pre[2 * hd + j] = g;
        pre[3 * hd + j] = o;
        c[j] = f * c[j] + i * g;
        h[j] = o * tanh(c[j]);
    }
}

/// Runs one direction of one layer over `seq` (`[t][b * input + k]`).
fn run_direction(
    w: &LstmLayerWeights,
    seq: &[Vec<f64>],
    batch: usize,
    input: usize,
    hidden: usize,
    h: &mut [f64],
    c: &mut [f64],
    reverse: bool,
) -> Vec<Vec<f64>> {
    let steps = seq.len();
    let mut out = vec![Vec::new(); steps];
    let mut pre = vec![0.0; 4 * hidden];
    for n in 0..steps {
        let t = if reverse { steps - 1 - n } else { n };
        let mut y = vec![0.0; batch * hidden];
        for b in 0..batch {
            let x = &seq[t][b * input..(b + 1) * input];
            let (hb, cb) = (
                &mut h[b * hidden..(b + 1) * hidden],
                &mut c[b * hidden..(b + 1) * hidden],
            );
            w.preactivations(x, hb, &mut pre);
            cell_step(&mut pre, hb, cb);
            y[b * hidden..(b + 1) * hidden].copy_from_slice(hb);
        }
        out[t] = y;
    }
    out
}

/// Multi-layer LSTM over the time axis of `[B, C, T]` with `C == hidden`.
///
/// Unidirectional: returns `[B, hidden, T]` and the state after the last
/// step, so a run can be continued exactly. Bidirectional: returns
/// `[B, 2 * hidden, T]` (forward channels first); the returned state is that
/// of the forward direction and `initial` is ignored by the backward one.
pub fn lstm_forward(
    input: &Tensor,
    weights: &LstmWeights,
    spec: &LstmSpec,
    initial: Option<&LstmState>,
) -> Result<(Tensor, LstmState)> {
    let [batch, channels, steps] = input.shape();
    if channels != spec.hidden {
        return Err(Error::shape(format!(
            "lstm input has {channels} channels, hidden size is {}",
            spec.hidden
        )));
    }
    weights.check(spec)?;
    let mut state = match initial {
        Some(s) => {
            s.check(spec, batch)?;
            s.clone()
        }
        None => LstmState::zeros(spec, batch),
    };
    let hd = spec.hidden;
    let dirs = spec.directions();

    // time-major rows
    let mut seq: Vec<Vec<f64>> = (0..steps)
        .map(|t| {
            let mut v = vec![0.0; batch * channels];
            for b in 0..batch {
                for ch in 0..channels {
                    v[b * channels + ch] = input.row(b, ch)[t];
                }
            }
            v
        })
        .collect();
    let mut width = channels;

    for l in 0..spec.layers {
        let fwd = run_direction(
            &weights.forward[l],
            &seq,
            batch,
            width,
            hd,
            &mut state.h[l],
            &mut state.c[l],
            false,
        );
        seq = if spec.bidirectional {
            let (mut h0, mut c0) = (vec![0.0; batch * hd], vec![0.0; batch * hd]);
            let bwd = run_direction(
                &weights.backward[l],
                &seq,
                batch,
                width,
                hd,
                &mut h0,
                &mut c0,
                true,
            );
            fwd.iter()
                .zip(&bwd)
                .map(|(f, r)| {
                    let mut v = vec![0.0; batch * 2 * hd];
                    for b in 0..batch {
                        v[b * 2 * hd..b * 2 * hd + hd].copy_from_slice(&f[b * hd..(b + 1) * hd]);
                        v[b * 2 * hd + hd..(b + 1) * 2 * hd]
                            .copy_from_slice(&r[b * hd..(b + 1) * hd]);
                    }
                    v
                })
                .collect()
        } else {
            fwd
        };
        width = hd * dirs;
    }

    let mut out = Tensor::zeros([batch, width, steps]);
    for (t, v) in seq.iter().enumerate() {
        for b in 0..batch {
            for ch in 0..width {
                out.row_mut(b, ch)[t] = v[b * width + ch];
            }
        }
    }
    Ok((out, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::max_abs_diff;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: [usize; 3], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape[0] * shape[1] * shape[2];
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-0.5..0.5)).collect()).unwrap()
    }

    fn random_weights(spec: &LstmSpec, rng: &mut ChaCha8Rng) -> LstmWeights {
        let mut w = LstmWeights::zeros(spec);
        for layer in w.forward.iter_mut().chain(w.backward.iter_mut()) {
            layer.w_ih = random(layer.w_ih.shape(), rng);
            layer.w_hh = random(layer.w_hh.shape(), rng);
            layer.bias = random(layer.bias.shape(), rng);
        }
        w
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let spec = LstmSpec {
            layers: 2,
            hidden: 3,
            bidirectional: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = random([2, 3, 7], &mut rng);
        let (y, _) = lstm_forward(&x, &LstmWeights::zeros(&spec), &spec, None).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn split_run_continues_exactly() {
        let spec = LstmSpec {
            layers: 2,
            hidden: 5,
            bidirectional: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_weights(&spec, &mut rng);
        let x = random([2, 5, 20], &mut rng);
        let (whole, end) = lstm_forward(&x, &w, &spec, None).unwrap();
        let (a, mid) = lstm_forward(&x.narrow_time(0, 8).unwrap(), &w, &spec, None).unwrap();
        let (b, end2) =
            lstm_forward(&x.narrow_time(8, 12).unwrap(), &w, &spec, Some(&mid)).unwrap();
        let joined = Tensor::cat_time(&[&a, &b]).unwrap();
        assert!(max_abs_diff(whole.data(), joined.data()) < 1e-12);
        assert!(max_abs_diff(&end.h[1], &end2.h[1]) < 1e-12);
    }

    #[test]
    fn empty_sequence_keeps_state() {
        let spec = LstmSpec {
            layers: 2,
            hidden: 2,
            bidirectional: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_weights(&spec, &mut rng);
        let mut s = LstmState::zeros(&spec, 1);
        s.h[0][1] = 0.3;
        s.c[1][0] = -0.2;
        let (y, s2) = lstm_forward(&Tensor::zeros([1, 2, 0]), &w, &spec, Some(&s)).unwrap();
        assert_eq!(y.time(), 0);
        assert_eq!(s, s2);
    }

    #[test]
    fn rejects_bad_state() {
        let spec = LstmSpec {
            layers: 2,
            hidden: 2,
            bidirectional: false,
        };
        let w = LstmWeights::zeros(&spec);
        let s = LstmState::zeros(&spec, 3);
        assert!(lstm_forward(&Tensor::zeros([1, 2, 4]), &w, &spec, Some(&s)).is_err());
    }

    #[test]
    fn single_step_matches_hand_formula() {
        let spec = LstmSpec {
            layers: 1,
            hidden: 1,
            bidirectional: false,
        };
        let mut w = LstmWeights::zeros(&spec);
        w.forward[0].w_ih = Tensor::new([4, 1, 1], vec![0.5, -0.3, 0.8, 0.2]).unwrap();
        w.forward[0].bias = Tensor::new([1, 4, 1], vec![0.1, 0.2, 0.0, -0.1]).unwrap();
        let x = 0.7;
        let (y, s) = lstm_forward(&Tensor::full([1, 1, 1], x), &w, &spec, None).unwrap();
        let i = sigmoid(0.5 * x + 0.1);
        let g = tanh(0.8 * x);
        let o = sigmoid(0.2 * x - 0.1);
        let c = i * g;
        assert!((s.c[0][0] - c).abs() < 1e-15);
        assert!((y.data()[0] - o * tanh(c)).abs() < 1e-15);
    }

    #[test]
    fn bidirectional_reverse_direction_sees_the_future() {
        let spec = LstmSpec {
            layers: 2,
            hidden: 3,
            bidirectional: true,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_weights(&spec, &mut rng);
        let x = random([1, 3, 10], &mut rng);
        let (y, _) = lstm_forward(&x, &w, &spec, None).unwrap();
        assert_eq!(y.shape(), [1, 6, 10]);
        let mut x2 = x.clone();
        x2.row_mut(0, 0)[9] += 1.0;
        let (y2, _) = lstm_forward(&x2, &w, &spec, None).unwrap();
        // layer 2 mixes both directions, so even t = 0 changes
        assert!((y.row(0, 0)[0] - y2.row(0, 0)[0]).abs() > 0.0);
    }
}
