use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("dimension {0} is not supported by this operation")]
    UnsupportedDimension(usize),

    #[error("window has zero norm")]
    ZeroWindow,

    #[error("{0} has zero norm")]
    ZeroNorm(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("generator spectrum reaches {lower:.3e}, below the guard limit {limit:.3e}")]
    BlowUp { lower: f64, limit: f64 },

    #[error("fit needs at least 3 usable bins, found {0}")]
    DegenerateFit(usize),

    #[error("Picard iteration did not converge (last gap {last_gap:.3e}, T0 {t0:.3e})")]
    NonConvergence { last_gap: f64, t0: f64 },

    #[error("cone does not meet the sample box")]
    EmptyCone,

    #[error("expression error: {0}")]
    Expression(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
