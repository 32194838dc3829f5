use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{op}: expected a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("{op}: matrix is not Hermitian (max asymmetry {deviation:.3e})")]
    NotHermitian { op: &'static str, deviation: f64 },

    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    /// Cholesky pivot collapsed: the system matrix is singular or indefinite.
    #[error("matrix is not numerically positive definite: pivot {index} has magnitude {pivot:.3e}")]
    NumericalRank { index: usize, pivot: f64 },

    #[error("relay output covariance is rank deficient: smallest kept eigenvalue {smallest:.3e} vs largest {largest:.3e}")]
    RankDeficient { smallest: f64, largest: f64 },

    #[error("{what} must be nonnegative, got {value}")]
    NegativeInput { what: &'static str, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("slope fit infeasible: {usable} usable point(s), need at least {required} (outage counts {counts:?})")]
    FitInfeasible {
        usable: usize,
        required: usize,
        counts: Vec<u64>,
    },

    #[error("trial {trial} at grid point {point} failed: {source}")]
    Trial {
        point: usize,
        trial: u64,
        #[source]
        source: Box<Error>,
    },
}
