use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    #[error("variable index {index} out of range for n = {n} (expected 1..={max})")]
    VariableOutOfRange { index: usize, n: usize, max: usize },

    #[error("evaluation domain error: {op} of non-positive argument {arg}")]
    Domain { op: &'static str, arg: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("theta components must be strictly positive, got {0}")]
    NonPositiveTheta(f64),

    #[error("k = {k} exceeds the configured maximum {max} (tensor cost is exponential in k)")]
    TooManyArguments { k: usize, max: usize },

    #[error("quadrature did not converge to the requested tolerance {tol} (best estimate error {err})")]
    QuadratureNonConvergence { tol: f64, err: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("complex matrix norm must satisfy ||A|| < 1, got {0}")]
    MatrixNormTooLarge(f64),

    #[error("structure invariant violated: {0}")]
    InvalidStructure(String),

    #[error("metric is not positive definite at the requested point")]
    MetricNotPositiveDefinite,

    #[error("coordinate change is singular at the requested point: {0}")]
    SingularCoordinateChange(String),

    #[error("map fails the holomorphy residual test: residual {0:.3e}")]
    NotHolomorphic(f64),

    #[error("disc solver did not converge in {iterations} iterations (last increment {last_increment:.3e})")]
    DiscNonConvergence { iterations: usize, last_increment: f64 },

    #[error("disc left the chart domain (|f - p| reached {0:.3})")]
    DomainEscape(f64),

    #[error("normalization verification failed: {0}")]
    NormalizationFailed(String),

    #[error("theorem hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("epsilon must be strictly positive, got {0}")]
    NonPositiveEpsilon(f64),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
