use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{what} contains a non-finite entry at ({row}, {col})")]
    NonFinite {
        what: &'static str,
        row: usize,
        col: usize,
    },

    #[error("invalid subsystem partition: {0}")]
    Partition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("initial state is identically zero; certificates require at least one nonzero entry")]
    ZeroInitialState,

    #[error("could not generate a connected graph after {attempts} attempts")]
    Disconnected { attempts: usize },

    #[error("spectral radius of A is zero; cannot rescale")]
    ZeroSpectralRadius,

    #[error("locality constraints infeasible for subsystems {subsystems:?}")]
    Infeasible { subsystems: Vec<usize> },

    #[error("io error")]
    Io(#[from] std::io::Error),

    #[error("malformed json")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
