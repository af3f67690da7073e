use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("dense indicator requested for {n} samples, above the cap of {cap}")]
    OracleCapExceeded { n: usize, cap: usize },

    #[error("matrix contains non-finite entries: {0}")]
    NonFinite(&'static str),

    #[error("no regularization up to sigma = {last_sigma:e} gave a usable Cholesky factor")]
    RegularizationExhausted { last_sigma: f64 },

    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),

    #[error("method {method} is not supported here: {reason}")]
    UnsupportedMethod { method: String, reason: String },

    #[error("input is not centered: set {set}, feature row {row} has mean {mean:e}")]
    NotCentered { set: usize, row: usize, mean: f64 },

    #[error("requested dimension {requested} exceeds the predicted bound {bound}")]
    DimensionAboveBound { requested: usize, bound: usize },

    #[error("requested dimension {requested} but only {available} positive eigenvalues exist")]
    NotEnoughPositive { requested: usize, available: usize },

    #[error("too few classes: {0}")]
    TooFewClasses(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
