//! Error type shared across the library.

use thiserror::Error;

/// Plain-f64 snapshot of a Mach-number diagnostic, carried inside
/// [`Error::MachRefusal`] regardless of the scalar type in use.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MachSummary {
    pub mach_norm: f64,
    pub c_m: f64,
    pub theta: f64,
    pub cpi_sharp: f64,
    pub threshold: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Requested something beyond what this build supports (e.g. a
    /// quadrature degree above the generator limit, or a polynomial degree
    /// outside the supported range).
    #[error("capability exceeded: {what} (maximum supported: {max})")]
    Capability { what: String, max: usize },

    #[error("numerically singular system: {0}")]
    Singular(String),

    #[error("solver did not reach the requested residual: achieved {achieved:e}, required {required:e}")]
    NonConvergence { achieved: f64, required: f64 },

    /// Strict-mode refusal when the Mach smallness condition fails.
    #[error("Mach condition violated: |c_s^-1 b|^2 = {:e} >= threshold {:e}", .0.mach_norm * .0.mach_norm, .0.threshold)]
    MachRefusal(MachSummary),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
