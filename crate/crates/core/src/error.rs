use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unreadable file {path}: {reason}")]
    Unreadable { path: PathBuf, reason: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("zero-dimension image")]
    ZeroDimension,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("no valid disparity in map")]
    NoValidDisparity,

    #[error("degenerate mask: {0}")]
    DegenerateMask(String),

    #[error("linear solve did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("solver diverged: {0}")]
    Divergence(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse failure classes, used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Io,
    Numerical,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Unreadable { .. } | Error::UnsupportedFormat(_) | Error::Io(_) => ErrorClass::Io,
            Error::ZeroDimension | Error::InvalidParameter { .. } | Error::SizeMismatch(_) => {
                ErrorClass::Config
            }
            Error::NoValidDisparity
            | Error::DegenerateMask(_)
            | Error::NonConvergence { .. }
            | Error::Divergence(_)
            | Error::NonFinite(_) => ErrorClass::Numerical,
            Error::Stage { source, .. } => source.class(),
        }
    }

    /// Exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Config => 2,
            ErrorClass::Io => 3,
            ErrorClass::Numerical => 4,
        }
    }
}
