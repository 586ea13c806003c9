use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("input shorter than kernel: length {len} < kernel {kernel}")]
    InputShorterThanKernel { len: usize, kernel: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("params do not match config: {0}")]
    ParamsMismatch(String),

    #[error("unsupported resampling factor {0} (expected 1, 2 or 4)")]
    UnsupportedFactor(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("signal too short: {len} samples, need at least {min}")]
    SignalTooShort { len: usize, min: usize },

    #[error("reference has zero spectral energy")]
    SilentReference,

    #[error("streaming requires a causal model")]
    NonCausal,

    #[error("stream is closed")]
    StreamClosed,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("training diverged at step {step}: loss {loss} > {limit}")]
    Diverged { step: usize, loss: f64, limit: f64 },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
