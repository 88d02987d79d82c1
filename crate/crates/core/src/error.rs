use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the domain of an operation (negative temperature,
    /// non-positive efficiency, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A type invariant or configuration constraint is violated.
    #[error("configuration error: {0}")]
    Config(String),

    /// Integration produced a non-finite or unphysical state.
    #[error("numerical failure at step {step} (t = {time_s:.6e} s): {detail}")]
    Numerical {
        step: usize,
        time_s: f64,
        detail: String,
    },

    /// Curve fitting could not proceed.
    #[error("fit error: {0}")]
    Fit(String),

    /// Scenario validation failed; one entry per offending key.
    #[error("scenario validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("parse error in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A failure raised while running a named scenario.
    #[error("scenario '{scenario}': {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Strips scenario context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Scenario { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Rejects NaN and infinities with a uniform message.
pub(crate) fn require_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be finite, got {value}")))
    }
}
