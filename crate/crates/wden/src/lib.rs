//! File formats, benchmarking and command line plumbing around
//! [`wden_core`].

pub mod bench;
pub mod config;
pub mod dataset;
pub mod report;
pub mod synth;
pub mod wav;
pub mod weights;

use std::path::PathBuf;

/// Errors of the std layer. [`Error::exit_code`] maps them onto the tool's
/// exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] wden_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Self::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// 2 usage, 3 data, 4 divergence or non-finite numbers.
    pub fn exit_code(&self) -> i32 {
        use wden_core::Error as C;
        match self {
            Error::Usage(_) => 2,
            Error::Io { .. } | Error::Format { .. } => 3,
            Error::Core(C::NonFinite(_) | C::Diverged { .. }) => 4,
            Error::Core(
                C::InvalidConfig(_)
                | C::InvalidArgument(_)
                | C::UnsupportedFactor(_)
                | C::NonCausal,
            ) => 2,
            Error::Core(_) => 3,
        }
    }
}
