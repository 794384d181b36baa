use thiserror::Error;

/// Errors raised by grid construction, operator assembly and the solvers.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("displacement {value} on axis {axis} exceeds d_max = {d_max}")]
    DisplacementOutOfRange { axis: usize, value: f64, d_max: f64 },
    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid boundary condition: {0}")]
    InvalidBoundary(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("eigensolver did not converge after {iterations} iterations (best residuals {residuals:?})")]
    NotConverged { iterations: usize, residuals: Vec<f64>, values: Vec<f64> },
    #[error("non-finite value produced by operator application")]
    NonFinite,
    #[error("spectral gap collapsed: E1 - E0 = {gap:e} at lambda = {lambda}")]
    GapCollapse { lambda: f64, gap: f64 },
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed field file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
