use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value at {0}")]
    NonFinite(String),
    #[error("linear solve failed: {what} residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    LinearSolveFailure {
        what: &'static str,
        residual: f64,
        tol: f64,
    },
    #[error("stability breach at t = {t}: field norm {norm:.3e} exceeds blowup guard")]
    StabilityBreach { t: f64, norm: f64 },
    #[error("compatibility violation: {0}")]
    CompatibilityViolation(String),
    #[error("time nodes do not match: {0}")]
    TimeNodeMismatch(String),
    #[error("trajectory incomplete: {0}")]
    TrajectoryIncomplete(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error("format error in {path}: {msg}")]
    Format { path: String, msg: String },
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 validation, 3 solver failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::LinearSolveFailure { .. }
            | Error::StabilityBreach { .. }
            | Error::NonFinite(_)
            | Error::TrajectoryIncomplete(_) => 3,
            _ => 2,
        }
    }
}
