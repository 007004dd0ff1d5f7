use std::path::PathBuf;

/// Errors raised by the synthesis, simulation and counting engines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A leg or setting references a mode that is not registered, or a term
    /// has the wrong shape.
    #[error("structural error: {0}")]
    Structural(String),

    /// Composition could not pair every virtual leg.
    #[error("synthesis error: {0}")]
    Synthesis(String),

    #[error("singular elimination: {0}")]
    Singularity(String),

    /// An argument is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The linear dynamics are unstable: parametric gain exceeds loss.
    /// `gain_ratio` is the factor by which couplings exceed the threshold.
    #[error("above parametric threshold (gain ratio {gain_ratio:.4}): {detail}")]
    Threshold { gain_ratio: f64, detail: String },

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("normalization error: {0}")]
    Normalization(String),

    /// Accidental estimate is zero, so (C - A)/A is undefined.
    #[error("CAR undefined: accidental estimate is zero (peak counts {peak_counts})")]
    UndefinedCar { peak_counts: u64 },

    #[error("setup error: {0}")]
    Setup(String),

    #[error("dimension {dim} exceeds the configured limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },

    #[error("{path}:{line}:{column}: {message}")]
    Syntax {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    /// Valid syntax but an invalid value; `key` is the dotted path of the
    /// offending entry.
    #[error("invalid scenario key `{key}`: {message}")]
    Semantic { key: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Structural(_)
            | Error::Synthesis(_)
            | Error::Singularity(_)
            | Error::Domain(_)
            | Error::Setup(_)
            | Error::DimensionLimit { .. }
            | Error::Syntax { .. }
            | Error::Semantic { .. }
            | Error::Io { .. } => 2,
            Error::Threshold { .. }
            | Error::Convergence { .. }
            | Error::Normalization(_)
            | Error::UndefinedCar { .. } => 3,
            Error::Internal(_) => 4,
        }
    }
}
