use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero polynomial cannot be normalized")]
    ZeroPolynomial,
    #[error("matrix is not symmetric positive definite")]
    NotSpd,
    #[error("ellipsoid parameter slab is empty")]
    EmptySlab,
    #[error("odd map is ill-posed: {j} components on a sphere of dimension {n}")]
    IllPosed { j: usize, n: usize },
    #[error("John ellipsoid certificate failed: {0}")]
    JohnCertificate(String),
    #[error("net certification failed: {0}")]
    NetCertificate(String),
    #[error("no net colour is close to the body")]
    NoColourMatch,
    #[error("working box misses {0:.3}% of the integrand mass bound")]
    BoxCoverage(f64),
    #[error("tuple enumeration exceeds {0} tuples")]
    TupleOverflow(usize),
    #[error("all cube weights vanish")]
    ZeroWeight,
    #[error("weight function precondition violated: {0}")]
    WeightPrecondition(String),
    #[error("odd-map search did not converge (max residual {max_residual:.4})")]
    NotConverged { max_residual: f64 },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
