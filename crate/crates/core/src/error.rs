use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("leading pencil coefficient is singular (rank {rank} < {n})")]
    SingularLeadingCoefficient { rank: usize, n: usize },

    #[error("inertia matrix is singular (rank {rank} < {n})")]
    SingularInertia { rank: usize, n: usize },

    #[error("{what} is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { what: &'static str, asymmetry: f64 },

    #[error("matrix is numerically singular (rank {rank} < {n})")]
    Singular { rank: usize, n: usize },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("no nonsingular principal submatrix of size {r} found")]
    NotFound { r: usize },

    #[error("theorem-predicted and computed verdicts disagree: {0}")]
    TheoremViolation(String),

    #[error("no eigenvalue on the imaginary axis near the requested parameter (|Re| = {real_part:.3e})")]
    NotAnAxisEigenvalue { real_part: f64 },

    #[error("eigenvalue tracking is ambiguous near gamma = {gamma}: increase the number of samples")]
    TrackingAmbiguity { gamma: f64 },

    #[error("eigenvector normalization failed: {0}")]
    NormalizationFailure(String),

    #[error("equilibrium solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("reduced load-flow Jacobian is singular")]
    SingularReducedJacobian,

    #[error("grid model is not lossless")]
    NotLossless,

    #[error("equilibrium lies outside the set Omega")]
    NotInOmega,

    #[error("no undamped generator carries the unobservable mode")]
    NoRepairIndex,

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64, state: Vec<f64> },

    #[error("Poincare section is not transversal to the flow at the seed")]
    NonTransversal,

    #[error("no limit cycle found after {returns} return-map iterations")]
    CycleNotFound { returns: usize },

    #[error("model file error at line {line}, column {column}: {message}")]
    ModelFormat {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid grid model: {0}")]
    InvalidModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
