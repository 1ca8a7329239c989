//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlgsrError {
    /// An argument fell outside an operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Matrix or vector dimensions do not match.
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    /// Non-finite values were produced by the solver.
    #[error("numerical failure at inner sweep {sweep}{}: {what}",
            .outer.map(|k| format!(" (outer iteration {k})")).unwrap_or_default())]
    Numerical {
        sweep: usize,
        outer: Option<usize>,
        what: String,
    },

    /// A PGM byte stream could not be decoded.
    #[error("pgm parse error at byte {offset}: {what}")]
    PgmParse { offset: usize, what: String },

    /// Invalid experiment or solver configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl FlgsrError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        FlgsrError::Domain(msg.into())
    }

    pub(crate) fn shape(expected: impl Into<String>, got: impl Into<String>) -> Self {
        FlgsrError::Shape {
            expected: expected.into(),
            got: got.into(),
        }
    }

    pub(crate) fn numerical(what: impl Into<String>) -> Self {
        FlgsrError::Numerical {
            sweep: 0,
            outer: None,
            what: what.into(),
        }
    }

    /// Attaches the inner sweep index to a numerical failure.
    pub(crate) fn at_sweep(self, sweep: usize) -> Self {
        match self {
            FlgsrError::Numerical { outer, what, .. } => FlgsrError::Numerical { sweep, outer, what },
            other => other,
        }
    }

    /// Attaches the outer iteration index to a numerical failure.
    pub(crate) fn at_outer(self, k: usize) -> Self {
        match self {
            FlgsrError::Numerical { sweep, what, .. } => FlgsrError::Numerical {
                sweep,
                outer: Some(k),
                what,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, FlgsrError>;
