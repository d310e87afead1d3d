use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature order {order} cannot integrate degree-{degree} polynomials exactly (need at least {required})")]
    QuadratureTooSmall {
        order: usize,
        degree: usize,
        required: usize,
    },

    #[error("sphere rule did not converge: doubling changed entry {index} by {change:.3e} (tolerance {tolerance:.1e})")]
    SphereRuleNotConverged {
        index: usize,
        change: f64,
        tolerance: f64,
    },

    #[error("target has a kernel component of size {component:.3e} (tolerance {tolerance:.1e})")]
    NotInRange { component: f64, tolerance: f64 },

    #[error("{what} is not positive: {value:.6e}")]
    NonPositive { what: &'static str, value: f64 },

    #[error("dense factorization failed for mode {mode}")]
    FactorizationFailed { mode: usize },

    #[error("solution blew up at t = {time:.6e}: norm grew by a factor {factor:.3e} in one step")]
    BlowUp { time: f64, factor: f64 },

    #[error("Picard iteration did not converge in {iterations} iterations (last increment {increment:.3e})")]
    PicardNotConverged { iterations: usize, increment: f64 },

    #[error("{failed} of {total} {what} failed")]
    ChecksFailed {
        what: &'static str,
        failed: usize,
        total: usize,
    },

    #[error("initial data is not well prepared: {0}")]
    NotWellPrepared(String),

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for bad input, 2 for numerical failure, 3 for
    /// file problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Format { .. } => 3,
            e if e.is_numerical() => 2,
            _ => 1,
        }
    }

    /// True for errors that come from the numerics rather than from the
    /// caller or the filesystem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SphereRuleNotConverged { .. }
                | Error::NotInRange { .. }
                | Error::NonPositive { .. }
                | Error::FactorizationFailed { .. }
                | Error::BlowUp { .. }
                | Error::PicardNotConverged { .. }
                | Error::ChecksFailed { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
