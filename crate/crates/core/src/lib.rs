//! Causal waveform-to-waveform speech enhancement.
//!
//! This crate holds everything that is pure computation: the 1-D tensor
//! kernels, the encoder/LSTM/decoder network, windowed-sinc resampling, the
//! frame-by-frame streaming engine, the multi-resolution STFT objective, the
//! waveform augmentations and a small reverse-mode training stack.
//!
//! It is `no_std` and only needs `alloc`. File formats, the command line tool
//! and wall-clock benchmarking live in the `wden` crate.
//!
//! ```
//! use wden_core::model::{self, DemucsConfig};
//! use wden_core::tensor::Tensor;
//!
//! let config = DemucsConfig::toy();
//! let params = model::init_params(&config, 7).unwrap();
//! let x = Tensor::from_signal(&[0.1; 400]);
//! let y = model::forward(&params, &config, &x).unwrap();
//! assert_eq!(y.time(), 400);
//! ```
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod augment;
mod error;
pub mod math;
pub mod model;
pub mod objective;
pub mod resample;
pub mod stream;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use model::{DemucsConfig, ModelParams};
pub use tensor::Tensor;
