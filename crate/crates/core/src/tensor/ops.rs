use alloc::format;
use alloc::vec;

use super::Tensor;
use crate::math::{axpy, dot, sigmoid};
use crate::{Error, Result};

/// Geometry of a 1-D convolution. For a transposed convolution `c_in` and
/// `c_out` keep their meaning relative to the transposed operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub bias: bool,
}

impl ConvSpec {
    pub fn new(c_in: usize, c_out: usize, kernel: usize, stride: usize) -> Self {
        Self {
            c_in,
            c_out,
            kernel,
            stride,
            bias: true,
        }
    }

    pub fn pointwise(c_in: usize, c_out: usize) -> Self {
        Self::new(c_in, c_out, 1, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.stride == 0 || self.c_in == 0 || self.c_out == 0 {
            return Err(Error::InvalidConfig(format!(
                "degenerate conv spec {self:?}"
            )));
        }
        Ok(())
    }

    /// Output length of the valid convolution, `None` if the input is
    /// shorter than the kernel.
    pub fn output_len(&self, len: usize) -> Option<usize> {
        (len >= self.kernel).then(|| (len - self.kernel) / self.stride + 1)
    }

    /// Output length of the transposed convolution for `len ≥ 1` inputs.
    pub fn transposed_len(&self, len: usize) -> usize {
        if len == 0 {
            0
        } else {
            (len - 1) * self.stride + self.kernel
        }
    }
}

fn check_bias(bias: Option<&Tensor>, spec: &ConvSpec) -> Result<()> {
    match bias {
        Some(b) if b.numel() != spec.c_out => Err(Error::shape(format!(
            "bias has {} values, expected {}",
            b.numel(),
            spec.c_out
        ))),
        None if spec.bias => Err(Error::shape("spec declares a bias but none was given")),
        _ => Ok(()),
    }
}

/// Valid 1-D convolution. `weight` is `[c_out, c_in, kernel]`.
pub fn conv1d(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    spec: &ConvSpec,
) -> Result<Tensor> {
    spec.validate()?;
    let [batch, c_in, len] = input.shape();
    if c_in != spec.c_in {
        return Err(Error::shape(format!(
            "conv1d: input has {c_in} channels, spec {}",
            spec.c_in
        )));
    }
    if weight.shape() != [spec.c_out, spec.c_in, spec.kernel] {
        return Err(Error::shape(format!(
            "conv1d: weight shape {:?}",
            weight.shape()
        )));
    }
    check_bias(bias, spec)?;
    let out_len = spec.output_len(len).ok_or(Error::InputShorterThanKernel {
        len,
        kernel: spec.kernel,
    })?;

    let k = spec.kernel;
    let fan = c_in * k;
    let mut out = Tensor::zeros([batch, spec.c_out, out_len]);
    let mut patch = vec![0.0; fan];
    let w = weight.data();
    for b in 0..batch {
        for t in 0..out_len {
            let start = t * spec.stride;
            for c in 0..c_in {
                patch[c * k..(c + 1) * k].copy_from_slice(&input.row(b, c)[start..start + k]);
            }
            for o in 0..spec.c_out {
                let mut acc = dot(&w[o * fan..(o + 1) * fan], &patch);
                if let Some(bias) = bias {
                    acc += bias.data()[o];
                }
                out.row_mut(b, o)[t] = acc;
            }
        }
    }
    Ok(out)
}

/// Transposed 1-D convolution (the adjoint of [`conv1d`] plus a bias).
/// `weight` is `[c_in, c_out, kernel]`, the same array a `c_out → c_in`
/// convolution would use.
pub fn conv_transpose1d(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    spec: &ConvSpec,
) -> Result<Tensor> {
    spec.validate()?;
    let [batch, c_in, len] = input.shape();
    if c_in != spec.c_in {
        return Err(Error::shape(format!(
            "conv_transpose1d: input has {c_in} channels, spec {}",
            spec.c_in
        )));
    }
    if weight.shape() != [spec.c_in, spec.c_out, spec.kernel] {
        return Err(Error::shape(format!(
            "conv_transpose1d: weight shape {:?}",
            weight.shape()
        )));
    }
    check_bias(bias, spec)?;
    let k = spec.kernel;
    let block = spec.c_out * k;
    let out_len = spec.transposed_len(len);
    let mut out = Tensor::zeros([batch, spec.c_out, out_len]);
    let mut acc = vec![0.0; block];
    let w = weight.data();
    for b in 0..batch {
        for t in 0..len {
            acc.iter_mut().for_each(|v| *v = 0.0);
            for c in 0..c_in {
                axpy(input.row(b, c)[t], &w[c * block..(c + 1) * block], &mut acc);
            }
            let start = t * spec.stride;
            for o in 0..spec.c_out {
                let row = out.row_mut(b, o);
                for (dst, src) in row[start..start + k]
                    .iter_mut()
                    .zip(&acc[o * k..(o + 1) * k])
                {
                    *dst += src;
                }
            }
        }
        if let Some(bias) = bias {
            for o in 0..spec.c_out {
                let beta = bias.data()[o];
                out.row_mut(b, o).iter_mut().for_each(|v| *v += beta);
            }
        }
    }
    Ok(out)
}

pub fn relu(input: &Tensor) -> Tensor {
    let data = input
        .data()
        .iter()
        .map(|&v| if v > 0.0 { v } else { 0.0 })
        .collect();
    Tensor::new(input.shape(), data).expect("same shape")
}

/// Gated linear unit over channels: the first half gated by the sigmoid of
/// the second half.
pub fn glu(input: &Tensor) -> Result<Tensor> {
    let [batch, c2, len] = input.shape();
    if c2 % 2 != 0 {
        return Err(Error::shape(format!(
            "glu needs an even channel count, got {c2}"
        )));
    }
    let c = c2 / 2;
    let mut out = Tensor::zeros([batch, c, len]);
    for b in 0..batch {
        for ci in 0..c {
            let (value, gate) = (input.row(b, ci), input.row(b, c + ci));
            for ((o, v), g) in out.row_mut(b, ci).iter_mut().zip(value).zip(gate) {
                *o = v * sigmoid(*g);
            }
        }
    }
    Ok(out)
}

/// Per-timestep affine map. `weight` is `[c_out, c_in, 1]`, which makes this
/// the same operator as a kernel-1 convolution.
pub fn linear(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    let [batch, c_in, len] = input.shape();
    let [c_out, w_in, one] = weight.shape();
    if w_in != c_in || one != 1 {
        return Err(Error::shape(format!(
            "linear: weight {:?} does not accept {c_in} channels",
            weight.shape()
        )));
    }
    if let Some(b) = bias {
        if b.numel() != c_out {
            return Err(Error::shape("linear: bias length"));
        }
    }
    let w = weight.data();
    let mut out = Tensor::zeros([batch, c_out, len]);
    for b in 0..batch {
        for o in 0..c_out {
            let mut row = vec![bias.map_or(0.0, |bias| bias.data()[o]); len];
            for c in 0..c_in {
                axpy(w[o * c_in + c], input.row(b, c), &mut row);
            }
            out.row_mut(b, o).copy_from_slice(&row);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: [usize; 3], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape[0] * shape[1] * shape[2];
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn conv_length_formula() {
        let spec = ConvSpec::new(1, 1, 8, 4);
        let w = Tensor::full([1, 1, 8], 1.0);
        let b = Tensor::vector(vec![0.0]);
        let y = conv1d(&Tensor::zeros([1, 1, 16]), &w, Some(&b), &spec).unwrap();
        assert_eq!(y.time(), 3);
        let y = conv1d(&Tensor::zeros([1, 1, 8]), &w, Some(&b), &spec).unwrap();
        assert_eq!(y.time(), 1);
    }

    #[test]
    fn conv_rejects_short_input_and_channel_mismatch() {
        let spec = ConvSpec::new(1, 1, 8, 4);
        let w = Tensor::zeros([1, 1, 8]);
        let b = Tensor::vector(vec![0.0]);
        assert_eq!(
            conv1d(&Tensor::zeros([1, 1, 7]), &w, Some(&b), &spec),
            Err(Error::InputShorterThanKernel { len: 7, kernel: 8 })
        );
        assert!(matches!(
            conv1d(&Tensor::zeros([1, 2, 16]), &w, Some(&b), &spec),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn conv_with_zero_weights_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random([2, 1, 40], &mut rng);
        let spec = ConvSpec::new(1, 3, 8, 4);
        let y = conv1d(
            &x,
            &Tensor::zeros([3, 1, 8]),
            Some(&Tensor::zeros([1, 1, 3])),
            &spec,
        )
        .unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = ConvSpec::new(2, 3, 4, 2);
        let x = random([1, 2, 11], &mut rng);
        let w = random([3, 2, 4], &mut rng);
        let b = random([1, 1, 3], &mut rng);
        let y = conv1d(&x, &w, Some(&b), &spec).unwrap();
        for o in 0..3 {
            for t in 0..y.time() {
                let mut s = b.data()[o];
                for c in 0..2 {
                    for k in 0..4 {
                        s += w.data()[(o * 2 + c) * 4 + k] * x.row(0, c)[2 * t + k];
                    }
                }
                assert!((y.row(0, o)[t] - s).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn transposed_lengths() {
        let spec = ConvSpec::new(1, 1, 8, 4);
        assert_eq!(spec.transposed_len(3), 16);
        assert_eq!(spec.transposed_len(1), 8);
        let w = Tensor::full([1, 1, 8], 1.0);
        let b = Tensor::vector(vec![0.0]);
        let y = conv_transpose1d(&Tensor::full([1, 1, 1], 2.0), &w, Some(&b), &spec).unwrap();
        assert_eq!(y.data(), &[2.0; 8]);
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(c_in, c_out, k, s, t) in &[(1, 4, 8, 4, 40), (3, 2, 8, 2, 33), (2, 5, 3, 1, 17)] {
            let spec = ConvSpec {
                c_in,
                c_out,
                kernel: k,
                stride: s,
                bias: false,
            };
            let tspec = ConvSpec {
                c_in: c_out,
                c_out: c_in,
                kernel: k,
                stride: s,
                bias: false,
            };
            let w = random([c_out, c_in, k], &mut rng);
            let u = random([2, c_in, t], &mut rng);
            let t_out = spec.output_len(t).unwrap();
            let v = random([2, c_out, t_out], &mut rng);
            let cu = conv1d(&u, &w, None, &spec).unwrap();
            let ctv = conv_transpose1d(&v, &w, None, &tspec).unwrap();
            let lhs = cu.inner(&v).unwrap();
            // ctv may be shorter than u when (t - k) % s != 0
            let rhs: f64 = (0..2)
                .flat_map(|b| (0..c_in).map(move |c| (b, c)))
                .map(|(b, c)| {
                    u.row(b, c)
                        .iter()
                        .zip(ctv.row(b, c))
                        .map(|(a, z)| a * z)
                        .sum::<f64>()
                })
                .sum();
            assert!(
                (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0),
                "{lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn relu_examples() {
        let x = Tensor::vector(vec![-1.0, 0.0, 2.0]);
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        assert!(relu(&Tensor::full([1, 2, 3], -0.5))
            .data()
            .iter()
            .all(|&v| v == 0.0));
        let pos = Tensor::vector(vec![0.5, 1.5]);
        assert_eq!(relu(&pos), pos);
    }

    #[test]
    fn glu_examples() {
        let x = Tensor::new([1, 4, 1], vec![1.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(glu(&x).unwrap().data(), &[0.5, 1.0]);
        let sat = Tensor::new([1, 2, 1], vec![3.0, 1e3]).unwrap();
        assert!((glu(&sat).unwrap().data()[0] - 3.0).abs() < 1e-12);
        assert!(glu(&Tensor::zeros([1, 3, 2])).is_err());
    }

    #[test]
    fn linear_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random([2, 3, 5], &mut rng);
        let mut eye = Tensor::zeros([3, 3, 1]);
        for i in 0..3 {
            eye.data_mut()[i * 3 + i] = 1.0;
        }
        assert_eq!(linear(&x, &eye, None).unwrap(), x);

        let bias = Tensor::vector(vec![0.25, -2.0]);
        let y = linear(&x, &Tensor::zeros([2, 3, 1]), Some(&bias)).unwrap();
        assert!(y.row(1, 0).iter().all(|&v| v == 0.25));
        assert!(y.row(0, 1).iter().all(|&v| v == -2.0));

        // merge 2C -> C, hand computed
        let x = random([1, 4, 3], &mut rng);
        let w = random([2, 4, 1], &mut rng);
        let y = linear(&x, &w, None).unwrap();
        for o in 0..2 {
            for t in 0..3 {
                let s: f64 = (0..4).map(|c| w.data()[o * 4 + c] * x.row(0, c)[t]).sum();
                assert!((y.row(0, o)[t] - s).abs() < 1e-14);
            }
        }
    }

    proptest! {
        #[test]
        fn conv_transpose_length_algebra(t in 1usize..200, k in 1usize..10, s in 1usize..6) {
            prop_assume!(t >= k);
            let spec = ConvSpec::new(1, 1, k, s);
            let down = spec.output_len(t).unwrap();
            let up = spec.transposed_len(down);
            prop_assert_eq!(up, ((t - k) / s) * s + k);
            prop_assert!(up <= t);
            prop_assert_eq!(up == t, (t - k) % s == 0);
        }

        #[test]
        fn relu_idempotent(values in proptest::collection::vec(-5.0f64..5.0, 0..50)) {
            let x = Tensor::vector(values);
            prop_assert_eq!(relu(&relu(&x)), relu(&x));
        }

        #[test]
        fn pointwise_conv_equals_linear(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random([2, 3, 9], &mut rng);
            let w = random([4, 3, 1], &mut rng);
            let b = random([1, 1, 4], &mut rng);
            let a = conv1d(&x, &w, Some(&b), &ConvSpec::pointwise(3, 4)).unwrap();
            let l = linear(&x, &w, Some(&b)).unwrap();
            let diff: Vec<f64> = a.data().iter().zip(l.data()).map(|(p, q)| (p - q).abs()).collect();
            prop_assert!(diff.iter().all(|&d| d < 1e-13));
        }

        #[test]
        fn ops_are_pure(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random([1, 2, 20], &mut rng);
            let w = random([3, 2, 4], &mut rng);
            let spec = ConvSpec { bias: false, ..ConvSpec::new(2, 3, 4, 2) };
            prop_assert_eq!(conv1d(&x, &w, None, &spec).unwrap(), conv1d(&x, &w, None, &spec).unwrap());
        }
    }
}
