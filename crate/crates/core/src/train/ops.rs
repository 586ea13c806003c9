//! Backward passes of the tensor operations. Each takes what its forward
//! pass saw plus the gradient of the output and returns gradients of every
//! input, weight and bias.

use alloc::vec;

use crate::math::{axpy, dot, sigmoid};
use crate::tensor::{conv1d, conv_transpose1d, ConvSpec, Tensor};
use crate::{Error, Result};

fn bias_grad(grad_out: &Tensor) -> Tensor {
    let [b, c, _] = grad_out.shape();
    let mut g = vec![0.0; c];
    for bi in 0..b {
        for (ci, gc) in g.iter_mut().enumerate() {
            *gc += grad_out.row(bi, ci).iter().sum::<f64>();
        }
    }
    Tensor::vector(g)
}

/// Gradients of [`conv1d`]: `(input, weight, bias)`.
pub fn conv1d_backward(
    input: &Tensor,
    weight: &Tensor,
    spec: &ConvSpec,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let [batch, c_in, len] = input.shape();
    let (k, s) = (spec.kernel, spec.stride);
    let t_out = grad_out.time();
    let tspec = ConvSpec {
        c_in: spec.c_out,
        c_out: spec.c_in,
        kernel: k,
        stride: s,
        bias: false,
    };
    let gi = conv_transpose1d(grad_out, weight, None, &tspec)?.pad_time(len);

    let mut gw = Tensor::zeros(weight.shape());
    let w = gw.data_mut();
    for b in 0..batch {
        for o in 0..spec.c_out {
            let go = grad_out.row(b, o);
            for c in 0..c_in {
                let x = input.row(b, c);
                for kk in 0..k {
                    let mut acc = 0.0;
                    for (t, g) in go.iter().enumerate().take(t_out) {
                        acc += g * x[t * s + kk];
                    }
                    w[(o * c_in + c) * k + kk] += acc;
                }
            }
        }
    }
    Ok((gi, gw, bias_grad(grad_out)))
}

/// Gradients of [`conv_transpose1d`]: `(input, weight, bias)`.
pub fn conv_transpose1d_backward(
    input: &Tensor,
    weight: &Tensor,
    spec: &ConvSpec,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let [batch, c_in, len] = input.shape();
    let (k, s) = (spec.kernel, spec.stride);
    let cspec = ConvSpec {
        c_in: spec.c_out,
        c_out: spec.c_in,
        kernel: k,
        stride: s,
        bias: false,
    };
    let gi = conv1d(grad_out, weight, None, &cspec)?;
    debug_assert_eq!(gi.time(), len);

    let mut gw = Tensor::zeros(weight.shape());
    let w = gw.data_mut();
    for b in 0..batch {
        for c in 0..c_in {
            let x = input.row(b, c);
            for o in 0..spec.c_out {
                let go = grad_out.row(b, o);
                for kk in 0..k {
                    let mut acc = 0.0;
                    for (t, xv) in x.iter().enumerate() {
                        acc += xv * go[t * s + kk];
                    }
                    w[(c * spec.c_out + o) * k + kk] += acc;
                }
            }
        }
    }
    Ok((gi, gw, bias_grad(grad_out)))
}

/// Gradient of ReLU given its input.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(input.shape(), data).expect("same shape")
}

/// Gradient of GLU given its input.
pub fn glu_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    let [batch, c2, _] = input.shape();
    let c = c2 / 2;
    let mut gi = Tensor::zeros(input.shape());
    for b in 0..batch {
        for ci in 0..c {
            let (a, g, go) = (input.row(b, ci), input.row(b, c + ci), grad_out.row(b, ci));
            let (mut da, mut dg) = (vec![0.0; a.len()], vec![0.0; a.len()]);
            for t in 0..a.len() {
                let sg = sigmoid(g[t]);
                da[t] = go[t] * sg;
                dg[t] = go[t] * a[t] * sg * (1.0 - sg);
            }
            gi.row_mut(b, ci).copy_from_slice(&da);
            gi.row_mut(b, c + ci).copy_from_slice(&dg);
        }
    }
    gi
}

/// Gradients of [`crate::tensor::linear`]: `(input, weight, bias)`.
pub fn linear_backward(
    input: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let [batch, c_in, len] = input.shape();
    let c_out = weight.shape()[0];
    if grad_out.shape() != [batch, c_out, len] {
        return Err(Error::shape("linear_backward: gradient shape"));
    }
    let w = weight.data();
    let mut gi = Tensor::zeros(input.shape());
    let mut gw = Tensor::zeros(weight.shape());
    for b in 0..batch {
        for o in 0..c_out {
            let go = grad_out.row(b, o);
            for c in 0..c_in {
                gw.data_mut()[o * c_in + c] += dot(go, input.row(b, c));
                axpy(w[o * c_in + c], go, gi.row_mut(b, c));
            }
        }
    }
    Ok((gi, gw, bias_grad(grad_out)))
}
