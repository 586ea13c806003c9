//! LSTM forward pass that keeps what backpropagation through time needs,
//! and the matching backward pass. Runs start from a zero state.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::tanh;
use crate::tensor::{cell_step, LstmLayerWeights, LstmSpec, LstmWeights, Tensor};
use crate::{Error, Result};

struct DirCache {
    /// Activated gates per step (processing order), `batch * 4H`.
    gates: Vec<Vec<f64>>,
    c_prev: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    h_prev: Vec<Vec<f64>>,
}

struct LayerCache {
    input: Vec<Vec<f64>>,
    width: usize,
    dirs: Vec<DirCache>,
}

pub struct LstmCache {
    batch: usize,
    steps: usize,
    layers: Vec<LayerCache>,
}

fn to_seq(x: &Tensor) -> Vec<Vec<f64>> {
    let [batch, ch, steps] = x.shape();
    (0..steps)
        .map(|t| {
            let mut v = vec![0.0; batch * ch];
            for b in 0..batch {
                for c in 0..ch {
                    v[b * ch + c] = x.row(b, c)[t];
                }
            }
            v
        })
        .collect()
}

fn from_seq(seq: &[Vec<f64>], batch: usize, width: usize) -> Tensor {
    let mut out = Tensor::zeros([batch, width, seq.len()]);
    for (t, v) in seq.iter().enumerate() {
        for b in 0..batch {
            for c in 0..width {
                out.row_mut(b, c)[t] = v[b * width + c];
            }
        }
    }
    out
}

fn run(
    w: &LstmLayerWeights,
    seq: &[Vec<f64>],
    batch: usize,
    input: usize,
    hd: usize,
    reverse: bool,
) -> (Vec<Vec<f64>>, DirCache) {
    let steps = seq.len();
    let (mut h, mut c) = (vec![0.0; batch * hd], vec![0.0; batch * hd]);
    let mut out = vec![Vec::new(); steps];
    let mut cache = DirCache {
        gates: Vec::new(),
        c_prev: Vec::new(),
        c: Vec::new(),
        h_prev: Vec::new(),
    };
    let mut pre = vec![0.0; 4 * hd];
    for n in 0..steps {
        let t = if reverse { steps - 1 - n } else { n };
        cache.h_prev.push(h.clone());
        cache.c_prev.push(c.clone());
        let mut gates = vec![0.0; batch * 4 * hd];
        for b in 0..batch {
            let x = &seq[t][b * input..(b + 1) * input];
            let (hb, cb) = (&mut h[b * hd..(b + 1) * hd], &mut c[b * hd..(b + 1) * hd]);
            w.preactivations(x, hb, &mut pre);
            cell_step(&mut pre, hb, cb);
            gates[b * 4 * hd..(b + 1) * 4 * hd].copy_from_slice(&pre);
        }
        cache.gates.push(gates);
        cache.c.push(c.clone());
        out[t] = h.clone();
    }
    (out, cache)
}

/// Same result as [`crate::tensor::lstm_forward`] from a zero state.
pub fn lstm_forward_cached(
    input: &Tensor,
    weights: &LstmWeights,
    spec: &LstmSpec,
) -> Result<(Tensor, LstmCache)> {
    let [batch, channels, steps] = input.shape();
    if channels != spec.hidden {
        return Err(Error::shape("lstm input width differs from hidden size"));
    }
    weights.check(spec)?;
    let hd = spec.hidden;
    let mut seq = to_seq(input);
    let mut width = channels;
    let mut layers = Vec::with_capacity(spec.layers);
    for l in 0..spec.layers {
        let (fwd, fc) = run(&weights.forward[l], &seq, batch, width, hd, false);
        let mut dirs = vec![fc];
        let next = if spec.bidirectional {
            let (bwd, bc) = run(&weights.backward[l], &seq, batch, width, hd, true);
            dirs.push(bc);
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
        layers.push(LayerCache {
            input: core::mem::replace(&mut seq, next),
            width,
            dirs,
        });
        width = hd * spec.directions();
    }
    Ok((
        from_seq(&seq, batch, width),
        LstmCache {
            batch,
            steps,
            layers,
        },
    ))
}

/// Backpropagation through one direction. `gy` is indexed by time, not
/// processing order. Accumulates into `gw` and returns the input gradient.
fn back_dir(
    w: &LstmLayerWeights,
    cache: &DirCache,
    input: &[Vec<f64>],
    width: usize,
    gy: &[Vec<f64>],
    batch: usize,
    hd: usize,
    reverse: bool,
    gw: &mut LstmLayerWeights,
) -> Vec<Vec<f64>> {
    let steps = input.len();
    let (wi, wh) = (w.w_ih.data(), w.w_hh.data());
    let mut gx = vec![vec![0.0; batch * width]; steps];
    let mut dh_next = vec![0.0; batch * hd];
    let mut dc_next = vec![0.0; batch * hd];
    let mut dpre = vec![0.0; 4 * hd];
    for n in (0..steps).rev() {
        let t = if reverse { steps - 1 - n } else { n };
        for b in 0..batch {
            let g = &cache.gates[n][b * 4 * hd..(b + 1) * 4 * hd];
            let c = &cache.c[n][b * hd..(b + 1) * hd];
            let cp = &cache.c_prev[n][b * hd..(b + 1) * hd];
            for j in 0..hd {
                let (i, f, gg, o) = (g[j], g[hd + j], g[2 * hd + j], g[3 * hd + j]);
                let dh = gy[t][b * hd + j] + dh_next[b * hd + j];
                let tc = tanh(c[j]);
                let dc = dh * o * (1.0 - tc * tc) + dc_next[b * hd + j];
                dpre[j] = dc * gg * i * (1.0 - i);
                dpre[hd + j] = dc * cp[j] * f * (1.0 - f);
                dpre[2 * hd + j] = dc * i * (1.0 - gg * gg);
                dpre[3 * hd + j] = dh * tc * o * (1.0 - o);
                dc_next[b * hd + j] = dc * f;
            }
            let x = &input[t][b * width..(b + 1) * width];
            let hp = &cache.h_prev[n][b * hd..(b + 1) * hd];
            let dhp = &mut dh_next[b * hd..(b + 1) * hd];
            dhp.iter_mut().for_each(|v| *v = 0.0);
            let gxb = &mut gx[t][b * width..(b + 1) * width];
            let (gwi, gwh, gb) = (gw.w_ih.data_mut(), gw.w_hh.data_mut(), gw.bias.data_mut());
            for (r, &d) in dpre.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb[r] += d;
                for k in 0..width {
                    gwi[r * width + k] += d * x[k];
                    gxb[k] += d * wi[r * width + k];
                }
                for k in 0..hd {
                    gwh[r * hd + k] += d * hp[k];
                    dhp[k] += d * wh[r * hd + k];
                }
            }
        }
    }
    gx
}

/// Gradients of the weights and of the input, given the output gradient.
pub fn lstm_backward(
    weights: &LstmWeights,
    spec: &LstmSpec,
    cache: &LstmCache,
    grad_out: &Tensor,
) -> Result<(Tensor, LstmWeights)> {
    let hd = spec.hidden;
    let dirs = spec.directions();
    let batch = cache.batch;
    if grad_out.shape() != [batch, hd * dirs, cache.steps] {
        return Err(Error::shape("lstm_backward: gradient shape"));
    }
    let mut grads = LstmWeights::zeros(spec);
    let mut g = to_seq(grad_out);
    for l in (0..spec.layers).rev() {
        let layer = &cache.layers[l];
        let split = |d: usize| -> Vec<Vec<f64>> {
            g.iter()
                .map(|v| {
                    let mut o = vec![0.0; batch * hd];
                    for b in 0..batch {
                        let src = b * hd * dirs + d * hd;
                        o[b * hd..(b + 1) * hd].copy_from_slice(&v[src..src + hd]);
                    }
                    o
                })
                .collect()
        };
        let gf = split(0);
        let mut gx = back_dir(
            &weights.forward[l],
            &layer.dirs[0],
            &layer.input,
            layer.width,
            &gf,
            batch,
            hd,
            false,
            &mut grads.forward[l],
        );
        if spec.bidirectional {
            let gb = split(1);
            let gr = back_dir(
                &weights.backward[l],
                &layer.dirs[1],
                &layer.input,
                layer.width,
                &gb,
                batch,
                hd,
                true,
                &mut grads.backward[l],
            );
            for (a, r) in gx.iter_mut().zip(&gr) {
                a.iter_mut().zip(r).for_each(|(x, y)| *x += y);
            }
        }
        g = gx;
    }
    Ok((from_seq(&g, batch, hd), grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::max_abs_diff;
    use crate::tensor::lstm_forward;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: [usize; 3], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape[0] * shape[1] * shape[2];
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-0.7..0.7)).collect()).unwrap()
    }

    fn setup(bidirectional: bool) -> (LstmSpec, LstmWeights, Tensor, Tensor) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = LstmSpec {
            layers: 2,
            hidden: 3,
            bidirectional,
        };
        let mut w = LstmWeights::zeros(&spec);
        for l in w.forward.iter_mut().chain(w.backward.iter_mut()) {
            l.w_ih = random(l.w_ih.shape(), &mut rng);
            l.w_hh = random(l.w_hh.shape(), &mut rng);
            l.bias = random(l.bias.shape(), &mut rng);
        }
        let x = random([2, 3, 6], &mut rng);
        let probe = random([2, 3 * spec.directions(), 6], &mut rng);
        (spec, w, x, probe)
    }

    #[test]
    fn cached_forward_matches_plain() {
        for bi in [false, true] {
            let (spec, w, x, _) = setup(bi);
            let (a, _) = lstm_forward(&x, &w, &spec, None).unwrap();
            let (b, _) = lstm_forward_cached(&x, &w, &spec).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn gradients_match_differences() {
        for bi in [false, true] {
            let (spec, w, x, probe) = setup(bi);
            let (_, cache) = lstm_forward_cached(&x, &w, &spec).unwrap();
            let (gx, gw) = lstm_backward(&w, &spec, &cache, &probe).unwrap();
            let f = |x: &Tensor, w: &LstmWeights| {
                lstm_forward(x, w, &spec, None)
                    .unwrap()
                    .0
                    .inner(&probe)
                    .unwrap()
            };
            let h = 1e-6;
            let mut num = Vec::new();
            for i in 0..x.numel() {
                let mut p = x.clone();
                p.data_mut()[i] += h;
                let up = f(&p, &w);
                p.data_mut()[i] -= 2.0 * h;
                num.push((up - f(&p, &w)) / (2.0 * h));
            }
            assert!(max_abs_diff(&num, gx.data()) < 1e-8);
            let layer_sets = [
                (&w.forward, &gw.forward, false),
                (&w.backward, &gw.backward, true),
            ];
            for (layers, glayers, rev) in layer_sets {
                for (l, gl) in glayers.iter().enumerate() {
                    for which in 0..3 {
                        let analytic = [&gl.w_ih, &gl.w_hh, &gl.bias][which];
                        for i in 0..analytic.numel() {
                            let mut p = w.clone();
                            let bump = |p: &mut LstmWeights, d: f64| {
                                let layer = if rev {
                                    &mut p.backward[l]
                                } else {
                                    &mut p.forward[l]
                                };
                                [&mut layer.w_ih, &mut layer.w_hh, &mut layer.bias][which]
                                    .data_mut()[i] += d;
                            };
                            bump(&mut p, h);
                            let up = f(&x, &p);
                            bump(&mut p, -2.0 * h);
                            let n = (up - f(&x, &p)) / (2.0 * h);
                            assert!(
                                (n - analytic.data()[i]).abs() < 1e-8,
                                "layer {l} tensor {which} idx {i}"
                            );
                        }
                    }
                }
                let _ = layers;
            }
        }
    }
}
