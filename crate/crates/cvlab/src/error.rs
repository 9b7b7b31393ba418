use thiserror::Error;

#[derive(Debug, Error)]
pub enum CvError {
    #[error("invalid Fock space: {0}")]
    InvalidSpace(String),
    #[error("mode index {index} out of range for {modes} mode(s)")]
    InvalidMode { index: usize, modes: usize },
    #[error("operands live in different Fock spaces")]
    SpaceMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("truncation too small: {0}")]
    TruncationTooSmall(String),
    #[error("zero-norm state")]
    ZeroNorm,
    #[error("operator is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("exponential did not converge: {0}")]
    NonConvergence(String),
    #[error("singular control: {0}")]
    SingularControl(String),
    #[error("leakage {leakage:.3e} exceeded abort threshold {threshold:.1e} at t = {t}")]
    LeakageAbort { t: f64, leakage: f64, threshold: f64 },
    #[error("dimension guard: {0}")]
    DimensionGuard(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CvError>;
