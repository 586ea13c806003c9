//! Model forward pass that records intermediates, and reverse-mode
//! gradients of the parameters.

use alloc::vec::Vec;

use super::lstm::{lstm_backward, lstm_forward_cached, LstmCache};
use super::ops::{
    conv1d_backward, conv_transpose1d_backward, glu_backward, linear_backward, relu_backward,
};
use crate::augment::PairBatch;
use crate::model::{input_scale, DemucsConfig, ModelParams};
use crate::objective::{total_loss_grad, LossReport, StftConfig};
use crate::resample::{self, Direction, SincFilter};
use crate::tensor::{conv1d, conv_transpose1d, glu, linear, relu, Tensor};
use crate::{Error, Result};

struct EncCache {
    input: Tensor,
    conv: Tensor,
    act: Tensor,
    rewire: Tensor,
}

struct DecCache {
    input: Tensor,
    rewire: Tensor,
    act: Tensor,
    conv: Tensor,
    carry_len: usize,
}

pub struct Tape {
    scale: Vec<f64>,
    len: usize,
    enc: Vec<EncCache>,
    lstm: LstmCache,
    lstm_out: Tensor,
    /// Decoder caches by layer index.
    dec: Vec<Option<DecCache>>,
    dec0_len: usize,
}

/// Same output as [`crate::model::forward`], plus the tape.
pub fn forward_tape(
    params: &ModelParams,
    config: &DemucsConfig,
    x: &Tensor,
) -> Result<(Tensor, Tape)> {
    config.validate()?;
    params.check(config)?;
    if x.channels() != 1 || x.time() == 0 {
        return Err(Error::shape("training input must be non-empty mono"));
    }
    let scale = input_scale(config, x);
    let mut xn = x.clone();
    for (b, d) in scale.iter().enumerate() {
        xn.item_mut(b).iter_mut().for_each(|v| *v /= d);
    }
    let t = x.time();
    let filter = SincFilter::default();
    let padded = xn.pad_time(config.valid_length(t));
    let mut h = resample::resample_factor(&padded, config.resample, Direction::Up, &filter)?;

    let mut enc = Vec::with_capacity(config.depth);
    for i in 0..config.depth {
        let e = &params.encoder[i];
        let conv = conv1d(&h, &e.conv_w, Some(&e.conv_b), &config.conv_spec(i))?;
        let act = relu(&conv);
        let rewire = linear(&act, &e.rewire_w, Some(&e.rewire_b))?;
        let out = glu(&rewire)?;
        enc.push(EncCache {
            input: h,
            conv,
            act,
            rewire,
        });
        h = out;
    }
    let z = h;
    let (lstm_out, lstm) = lstm_forward_cached(&z, &params.lstm, &config.lstm_spec())?;
    let mut h = match &params.merge {
        Some((w, b)) => linear(&lstm_out, w, Some(b))?,
        None => lstm_out.clone(),
    }
    .add(&z)?;

    let mut dec: Vec<Option<DecCache>> = (0..config.depth).map(|_| None).collect();
    for i in (0..config.depth).rev() {
        let d = &params.decoder[i];
        let carry_len = h.time();
        let skip_out = if i + 1 < config.depth {
            &enc[i + 1].input
        } else {
            &z
        };
        let input = h.add_truncated(skip_out)?;
        let rewire = linear(&input, &d.rewire_w, Some(&d.rewire_b))?;
        let act = glu(&rewire)?;
        let conv = conv_transpose1d(
            &act,
            &d.conv_tr_w,
            Some(&d.conv_tr_b),
            &config.conv_transpose_spec(i),
        )?;
        h = if i > 0 { relu(&conv) } else { conv.clone() };
        dec[i] = Some(DecCache {
            input,
            rewire,
            act,
            conv,
            carry_len,
        });
    }
    let dec0_len = h.time();
    let mut y = resample::resample_factor(&h, config.resample, Direction::Down, &filter)?
        .narrow_time(0, t)?;
    for (b, d) in scale.iter().enumerate() {
        y.item_mut(b).iter_mut().for_each(|v| *v *= d);
    }
    Ok((
        y,
        Tape {
            scale,
            len: t,
            enc,
            lstm,
            lstm_out,
            dec,
            dec0_len,
        },
    ))
}

fn grow(g: &Tensor, len: usize) -> Tensor {
    if g.time() >= len {
        g.clone()
    } else {
        g.pad_time(len)
    }
}

/// Parameter gradients given the gradient of the forward output. The
/// normalization scale depends on the input only and is held fixed.
pub fn backward_tape(
    params: &ModelParams,
    config: &DemucsConfig,
    tape: &Tape,
    grad_out: &Tensor,
) -> Result<ModelParams> {
    let batch = tape.scale.len();
    if grad_out.shape() != [batch, 1, tape.len] {
        return Err(Error::shape("backward: gradient shape differs from output"));
    }
    let mut grads = ModelParams::zeros(config)?;
    let filter = SincFilter::default();
    let u = config.resample;

    let mut g = Tensor::zeros([batch, 1, tape.dec0_len]);
    for b in 0..batch {
        let gy: Vec<f64> = grad_out.item(b).iter().map(|v| v * tape.scale[b]).collect();
        let full = gy
            .iter()
            .copied()
            .chain(core::iter::repeat(0.0))
            .take(resample::down_len(tape.dec0_len, u))
            .collect::<Vec<_>>();
        let back = resample::downsample_adjoint(&full, tape.dec0_len, u, &filter)?;
        g.item_mut(b).copy_from_slice(&back);
    }

    // decoder, in reverse of its forward order (0 up to L − 1)
    let mut skip_grads: Vec<Option<Tensor>> = (0..config.depth).map(|_| None).collect();
    for i in 0..config.depth {
        let c = tape.dec[i].as_ref().expect("decoder cache");
        let d = &params.decoder[i];
        let gconv = if i > 0 {
            relu_backward(&c.conv, &g)
        } else {
            g.clone()
        };
        let (gact, gw, gb) = conv_transpose1d_backward(
            &c.act,
            &d.conv_tr_w,
            &config.conv_transpose_spec(i),
            &gconv,
        )?;
        grads.decoder[i].conv_tr_w = gw;
        grads.decoder[i].conv_tr_b = gb;
        let grew = glu_backward(&c.rewire, &gact);
        let (gin, gw, gb) = linear_backward(&c.input, &d.rewire_w, &grew)?;
        grads.decoder[i].rewire_w = gw;
        grads.decoder[i].rewire_b = gb;
        // input = carry[..n] + skip[..n]
        skip_grads[i] = Some(gin.clone());
        g = grow(&gin, c.carry_len);
    }

    // bottleneck: ẑ = merge(LSTM(z)) + z
    let spec = config.lstm_spec();
    let mut glstm = g.clone();
    if let Some((w, _)) = &params.merge {
        let (gi, gw, gb) = linear_backward(&tape.lstm_out, w, &g)?;
        grads.merge = Some((gw, gb));
        glstm = gi;
    }
    let (gz, lw) = lstm_backward(&params.lstm, &spec, &tape.lstm, &glstm)?;
    grads.lstm = lw;
    let mut g = g.add(&gz)?;

    for i in (0..config.depth).rev() {
        let c = &tape.enc[i];
        let e = &params.encoder[i];
        let out_len = c.rewire.time();
        let mut gout = grow(&g, out_len);
        if gout.time() > out_len {
            gout = gout.narrow_time(0, out_len)?;
        }
        if let Some(s) = &skip_grads[i] {
            let s = grow(s, out_len);
            gout = gout.add(&s.narrow_time(0, out_len)?)?;
        }
        let grew = glu_backward(&c.rewire, &gout);
        let (gact, gw, gb) = linear_backward(&c.act, &e.rewire_w, &grew)?;
        grads.encoder[i].rewire_w = gw;
        grads.encoder[i].rewire_b = gb;
        let gconv = relu_backward(&c.conv, &gact);
        let (gin, gw, gb) = conv1d_backward(&c.input, &e.conv_w, &config.conv_spec(i), &gconv)?;
        grads.encoder[i].conv_w = gw;
        grads.encoder[i].conv_b = gb;
        g = gin;
    }
    Ok(grads)
}

/// Result of [`backward`]: batch-mean loss, per-item reports, gradients.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub loss: f64,
    pub reports: Vec<LossReport>,
    pub grads: ModelParams,
}

/// Mean over the batch of the training loss between `model(noisy)` and
/// `clean`, and its gradient with respect to every parameter.
pub fn backward(
    params: &ModelParams,
    config: &DemucsConfig,
    batch: &PairBatch,
    beta: f64,
    resolutions: &[StftConfig],
) -> Result<Gradients> {
    let (y_hat, tape) = forward_tape(params, config, &batch.noisy())?;
    let n = batch.batch();
    let mut grad = Tensor::zeros(y_hat.shape());
    let mut reports = Vec::with_capacity(n);
    let mut loss = 0.0;
    for b in 0..n {
        let (r, g) = total_loss_grad(batch.clean.item(b), y_hat.item(b), beta, resolutions)?;
        loss += r.total / n as f64;
        grad.item_mut(b)
            .iter_mut()
            .zip(&g)
            .for_each(|(d, s)| *d = s / n as f64);
        reports.push(r);
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    let grads = backward_tape(params, config, &tape, &grad)?;
    Ok(Gradients {
        loss,
        reports,
        grads,
    })
}

/// The batch-mean loss alone, through the inference forward pass.
pub fn loss_value(
    params: &ModelParams,
    config: &DemucsConfig,
    batch: &PairBatch,
    beta: f64,
    resolutions: &[StftConfig],
) -> Result<f64> {
    let y_hat = crate::model::forward(params, config, &batch.noisy())?;
    let n = batch.batch();
    let mut loss = 0.0;
    for b in 0..n {
        loss +=
            crate::objective::total_loss(batch.clean.item(b), y_hat.item(b), beta, resolutions)?
                .total
                / n as f64;
    }
    Ok(loss)
}
