use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("iteration did not converge: {0}")]
    NonConvergent(String),

    #[error("reduced innovations covariance is singular at iterate {iteration}")]
    SingularInnovations { iteration: usize },

    #[error("matrix is not positive-definite: {0}")]
    NotPositiveDefinite(String),

    #[error("transfer function is singular at omega = {omega}")]
    SingularPhi { omega: f64 },

    #[error("spectral matrix is singular at omega = {omega}")]
    SingularSpectrum { omega: f64 },

    #[error("regressor Gram matrix is rank deficient")]
    RankDeficient,

    #[error("target not achievable: {0}")]
    Unachievable(String),

    #[error("model is not on the null space: A[{lag}][{row},{col}] = {value}")]
    NotNull {
        lag: usize,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("degenerate law: all weights vanish")]
    DegenerateLaw,

    #[error("CDF accuracy could not be certified (error bound {bound:e})")]
    AccuracyNotMet { bound: f64 },

    #[error("fitted model is unstable (spectral radius {radius})")]
    UnstableFit { radius: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal consistency failure: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for convergence or achievability
    /// failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergent(_)
            | Error::SingularInnovations { .. }
            | Error::Unachievable(_)
            | Error::AccuracyNotMet { .. }
            | Error::UnstableFit { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
