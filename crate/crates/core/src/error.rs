use thiserror::Error;

/// Errors raised across the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unsupported dimension {0}: n must lie in 3..=10")]
    UnsupportedDimension(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("antipodal singularity: 1 + a.x = {0:e}")]
    AntipodalSingularity(f64),
    #[error("coincident points: |a - b| = {0:e}")]
    CoincidentPoints(f64),
    #[error("curvature field is not positive: min K = {0}")]
    NonpositiveField(f64),
    #[error("invalid curvature field: {0}")]
    InvalidField(String),
    #[error("degenerate critical point at {location:?}: least |eig| = {least_eigenvalue:e}")]
    NotMorse {
        location: Vec<f64>,
        least_eigenvalue: f64,
    },
    #[error("concentration parameter must be positive, got {0}")]
    NonpositiveLambda(f64),
    #[error("concentration parameter {0:e} overflows the quadrature range")]
    LambdaOverflow(f64),
    #[error("unknown constant `{0}`")]
    UnknownConstant(String),
    #[error("radial integral diverges: {0}")]
    Divergent(String),
    #[error("radial quadrature did not converge: {0}")]
    NonConvergent(String),
    #[error("quadrature grid too coarse: {0}")]
    ResolutionTooCoarse(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("point is not a blow-up candidate: {0}")]
    NotBlowupCandidate(String),
    #[error("ill-conditioned Gram matrix: condition number {0:e}")]
    IllConditioned(f64),
    #[error("iterates left the regime of the expansion: {0}")]
    LeftRegime(String),
    #[error("iteration did not converge: {0}")]
    NonConvergence(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
