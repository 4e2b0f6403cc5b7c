use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: {context} (expected {expected}, got {got})")]
    LengthMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite sample in {context}")]
    NonFinite { context: &'static str },

    #[error("history length must be positive, got r = {r}")]
    NonPositiveHistory { r: f64 },

    #[error("argument {s} outside the segment domain [-{r}, 0] ∪ {{1..{n}}}")]
    OutsideDomain { s: f64, r: f64, n: usize },

    #[error("delay argument tau = {tau} outside [0, {r}]")]
    TauOutOfRange { tau: f64, r: f64 },

    #[error("root bracketing failed: {0}")]
    BracketFailure(String),

    #[error("segment is within the near-origin ball; V is undefined there")]
    NearOrigin,

    #[error("every sample in the counting window is a tolerance zero; V is indeterminate")]
    IndeterminateWindow,

    #[error("window start a = {a} outside [-{r}, 0)")]
    WindowOutOfRange { a: f64, r: f64 },

    #[error("step size dt = {dt} violates dt <= min(h, 1/(2*alpha2)) = {limit}")]
    StepSizeViolation { dt: f64, limit: f64 },

    #[error("delayed argument {eta} reaches before stored history (starts at {start})")]
    HistoryUnderrun { eta: f64, start: f64 },

    #[error("state became non-finite at t = {t} (blow-up)")]
    NonFiniteState { t: f64 },

    #[error("requested time {t} before full history coverage (first covered: {first})")]
    BeforeCoverage { t: f64, first: f64 },

    #[error("derivative estimate is non-finite for component {index}")]
    BadDerivative { index: usize },

    #[error("contour passes too close to a characteristic root after {attempts} perturbation attempts")]
    ContourNearRoot { attempts: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid system specification: {0}")]
    SystemSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
