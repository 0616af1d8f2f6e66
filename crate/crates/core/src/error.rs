use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("measure has zero total mass")]
    ZeroMass,
    #[error("measure has no atoms")]
    EmptyMeasure,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid weight {0}: weights must be finite and positive")]
    InvalidWeight(f64),
    #[error("non-finite coordinate in atom {0}")]
    NonFinite(usize),
    #[error("barycentres differ by {distance:.3e} (tolerance {tol:.3e})")]
    BarycentreMismatch { distance: f64, tol: f64 },
    #[error("loads are unbalanced: {0}")]
    Unbalanced(String),
    #[error("conic solver reached the iteration limit ({iters}) with residual {residual:.3e}")]
    MaxIters { iters: usize, residual: f64 },
    #[error("problem is infeasible: {0}")]
    Infeasible(String),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("certificate check failed: max residual {max_residual:.3e} exceeds {tol:.3e}")]
    CertificateFailure { max_residual: f64, tol: f64 },
    #[error("disintegration failure at target atom {0}")]
    DisintegrationFailure(usize),
    #[error("matrix is not positive semi-definite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("the four points are collinear")]
    Collinear,
    #[error("measures are not centred: {0}")]
    NotCentred(String),
    #[error("angle between opposite edges is zero")]
    ZeroAngle,
    #[error("size guard exceeded: {size} > {limit}")]
    GuardExceeded { size: usize, limit: usize },
    #[error("degenerate segment: x and y coincide")]
    DegenerateSegment,
    #[error("operation requires dimension {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Validation problems map to exit code 1, solver failures to 2.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::MaxIters { .. }
                | Error::Infeasible(_)
                | Error::NumericalBreakdown(_)
                | Error::CertificateFailure { .. }
                | Error::DisintegrationFailure(_)
        )
    }
}
