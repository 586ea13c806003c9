//! A rank-3 `[batch, channels, time]` array of `f64` and the small, closed
//! set of 1-D operations the network is built from.
//!
//! Every operation is a pure function of its arguments. Convolutions are
//! valid-only: no operation pads implicitly, so all padding is visible in the
//! model and stream code that calls them.

mod lstm;
mod ops;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

pub use lstm::{
    cell_step, lstm_forward, LstmLayerWeights, LstmSpec, LstmState, LstmWeights, GATES,
};
pub use ops::{conv1d, conv_transpose1d, glu, linear, relu, ConvSpec};

/// Contiguous `[batch, channels, time]` storage, batch-major then
/// channel-major. Parameters reuse the same type with their own axis
/// conventions (for example `[c_out, c_in, kernel]` for a convolution).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: [usize; 3],
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let numel = shape[0] * shape[1] * shape[2];
        if data.len() != numel {
            return Err(Error::shape(format!(
                "data length {} does not match shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: [usize; 3]) -> Self {
        Self {
            shape,
            data: vec![0.0; shape[0] * shape[1] * shape[2]],
        }
    }

    pub fn full(shape: [usize; 3], value: f64) -> Self {
        Self {
            shape,
            data: vec![value; shape[0] * shape[1] * shape[2]],
        }
    }

    /// A mono signal as `[1, 1, T]`.
    pub fn from_signal(samples: &[f64]) -> Self {
        Self {
            shape: [1, 1, samples.len()],
            data: samples.to_vec(),
        }
    }

    /// Stacks equal-length mono signals into `[B, 1, T]`.
    pub fn from_signals(signals: &[Vec<f64>]) -> Result<Self> {
        let t = signals.first().map_or(0, Vec::len);
        if signals.iter().any(|s| s.len() != t) {
            return Err(Error::shape("signals have different lengths"));
        }
        let data = signals.iter().flatten().copied().collect();
        Tensor::new([signals.len(), 1, t], data)
    }

    /// A 1-D vector stored as `[1, 1, n]` (the convention for biases).
    pub fn vector(values: Vec<f64>) -> Self {
        Self {
            shape: [1, 1, values.len()],
            data: values,
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn time(&self) -> usize {
        self.shape[2]
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// The time series at `(batch, channel)`.
    pub fn row(&self, b: usize, c: usize) -> &[f64] {
        let t = self.shape[2];
        let start = (b * self.shape[1] + c) * t;
        &self.data[start..start + t]
    }

    pub fn row_mut(&mut self, b: usize, c: usize) -> &mut [f64] {
        let t = self.shape[2];
        let start = (b * self.shape[1] + c) * t;
        &mut self.data[start..start + t]
    }

    /// All channels of one batch item, `channels * time` values.
    pub fn item(&self, b: usize) -> &[f64] {
        let n = self.shape[1] * self.shape[2];
        &self.data[b * n..(b + 1) * n]
    }

    pub fn item_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.shape[1] * self.shape[2];
        &mut self.data[b * n..(b + 1) * n]
    }

    /// Copies out the time window `[start, start + len)` of every row.
    pub fn narrow_time(&self, start: usize, len: usize) -> Result<Tensor> {
        if start + len > self.time() {
            return Err(Error::shape(format!(
                "time window {}..{} exceeds length {}",
                start,
                start + len,
                self.time()
            )));
        }
        let [b, c, _] = self.shape;
        let mut data = Vec::with_capacity(b * c * len);
        for bi in 0..b {
            for ci in 0..c {
                data.extend_from_slice(&self.row(bi, ci)[start..start + len]);
            }
        }
        Tensor::new([b, c, len], data)
    }

    /// Right-pads every row with zeros up to `len` samples.
    pub fn pad_time(&self, len: usize) -> Tensor {
        if len <= self.time() {
            return self.clone();
        }
        let [b, c, _] = self.shape;
        let mut out = Tensor::zeros([b, c, len]);
        for bi in 0..b {
            for ci in 0..c {
                out.row_mut(bi, ci)[..self.time()].copy_from_slice(self.row(bi, ci));
            }
        }
        out
    }

    /// Concatenates along time. Batch and channel counts must agree.
    pub fn cat_time(parts: &[&Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("nothing to concatenate"))?;
        let [b, c, _] = first.shape;
        if parts.iter().any(|p| p.batch() != b || p.channels() != c) {
            return Err(Error::shape("cat_time: batch/channel mismatch"));
        }
        let total: usize = parts.iter().map(|p| p.time()).sum();
        let mut out = Tensor::zeros([b, c, total]);
        for bi in 0..b {
            for ci in 0..c {
                let mut at = 0;
                let row = out.row_mut(bi, ci);
                for p in parts {
                    let src = p.row(bi, ci);
                    row[at..at + src.len()].copy_from_slice(src);
                    at += src.len();
                }
            }
        }
        Ok(out)
    }

    /// Elementwise sum over the common time prefix. The longer operand's
    /// tail is dropped.
    pub fn add_truncated(&self, other: &Tensor) -> Result<Tensor> {
        if self.batch() != other.batch() || self.channels() != other.channels() {
            return Err(Error::shape(format!(
                "cannot add {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        let len = self.time().min(other.time());
        let [b, c, _] = self.shape;
        let mut out = Tensor::zeros([b, c, len]);
        for bi in 0..b {
            for ci in 0..c {
                let (x, y) = (self.row(bi, ci), other.row(bi, ci));
                for (o, (a, z)) in out.row_mut(bi, ci).iter_mut().zip(x.iter().zip(y)) {
                    *o = a + z;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "cannot add {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Tensor::new(self.shape, data)
    }

    pub fn scale(&self, alpha: f64) -> Tensor {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| v * alpha).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Sum of elementwise products; both tensors must have the same shape.
    pub fn inner(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::shape("inner: shape mismatch"));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inconsistent_data_length() {
        assert!(Tensor::new([2, 3, 4], vec![0.0; 23]).is_err());
        assert!(Tensor::new([2, 3, 4], vec![0.0; 24]).is_ok());
        assert!(Tensor::new([1, 1, 0], vec![]).is_ok());
    }

    #[test]
    fn rows_are_batch_then_channel_major() {
        let t = Tensor::new([2, 2, 3], (0..12).map(f64::from).collect()).unwrap();
        assert_eq!(t.row(0, 1), &[3.0, 4.0, 5.0]);
        assert_eq!(t.row(1, 0), &[6.0, 7.0, 8.0]);
        assert_eq!(t.item(1).len(), 6);
    }

    #[test]
    fn narrow_and_cat_are_inverse() {
        let t = Tensor::new([1, 2, 5], (0..10).map(f64::from).collect()).unwrap();
        let a = t.narrow_time(0, 2).unwrap();
        let b = t.narrow_time(2, 3).unwrap();
        assert_eq!(Tensor::cat_time(&[&a, &b]).unwrap(), t);
        assert!(t.narrow_time(3, 3).is_err());
    }

    #[test]
    fn add_truncated_keeps_common_prefix() {
        let a = Tensor::new([1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let b = Tensor::new([1, 1, 2], vec![10.0, 20.0]).unwrap();
        assert_eq!(a.add_truncated(&b).unwrap().data(), &[11.0, 22.0]);
    }
}
