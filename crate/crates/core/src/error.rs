use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid signal spec: {0}")]
    InvalidSpec(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("simulation diverged at t = {t:.3} s (omega = {omega})")]
    Divergence { t: f64, omega: f64 },

    #[error("innovation covariance is not invertible (condition number {condition:e})")]
    SingularInnovation { condition: f64 },

    #[error("non-finite filter state after step")]
    NonFiniteState,

    #[error("threshold too aggressive: every candidate feature was pruned")]
    ThresholdTooAggressive,

    #[error("identified structure outside the omega-u model form: {}", .0.join(", "))]
    UnexpectedStructure(Vec<String>),

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Failures of the numerics rather than of the inputs. The CLI maps these
    /// to exit code 2.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. }
                | Error::SingularInnovation { .. }
                | Error::NonFiniteState
                | Error::ThresholdTooAggressive
                | Error::UnexpectedStructure(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
