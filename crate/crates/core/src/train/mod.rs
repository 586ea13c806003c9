//! Gradients, optimizer and a small training loop.

mod check;
mod fit;
mod lstm;
pub mod ops;
mod optim;
mod tape;

pub use check::{
    conditioned_pair, grad_check, min_rel_magnitude, nudge_biases, CheckOptions, GradReport,
    TensorCheck, DEFAULT_STEP, MIN_CONDITIONING, TOLERANCE,
};
pub use fit::{overfit, FitOptions, DIVERGENCE_FACTOR};
pub use lstm::{lstm_backward, lstm_forward_cached, LstmCache};
pub use optim::{adam_step, AdamState};
pub use tape::{backward, backward_tape, forward_tape, loss_value, Gradients, Tape};
