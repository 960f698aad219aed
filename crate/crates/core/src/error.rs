use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("invalid norm order {0}: finite p must be >= 1")]
    InvalidNorm(f64),

    #[error("point index {index} out of range for a space of {n} points")]
    PointOutOfRange { index: usize, n: usize },

    #[error("center set is empty; no center to connect to")]
    EmptyCenterSet,

    #[error("center set holds {got} centers, budget is {k}")]
    TooManyCenters { got: usize, k: usize },

    #[error("invalid fractional opening: {0}")]
    InvalidOpening(String),

    #[error("opening mass {mass} cannot absorb unit demand")]
    InsufficientMass { mass: f64 },

    #[error("invalid learner configuration: {0}")]
    InvalidConfig(String),

    #[error("round holds {got} clients, cap is {cap}")]
    ClientCapExceeded { got: usize, cap: usize },

    #[error("invalid stream: {0}")]
    InvalidStream(String),

    #[error("oracle guard exceeded: {0}")]
    OracleGuard(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
