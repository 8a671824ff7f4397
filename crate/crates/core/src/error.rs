use thiserror::Error;

/// Errors produced by the localization engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("scenario parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("coincident points: {0}")]
    CoincidentPoints(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("point ({x}, {y}) lies outside the room")]
    OutsideRoom { x: f64, y: f64 },

    #[error("snapshots were taken under different IRS patterns")]
    PatternMismatch,

    #[error("pattern source does not match the scan grid: {0}")]
    GridMismatch(String),

    #[error("array of {n} elements with spacing {spacing} m has no angular resolution at wavelength {lambda} m")]
    NoAngularResolution { n: usize, spacing: f64, lambda: f64 },

    #[error("bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),

    #[error("detected set is empty")]
    EmptyDetectedSet,

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NonHermitian(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("SDP solver did not converge after {iterations} iterations (relative gap {gap:e})")]
    SdpNotConverged { iterations: usize, gap: f64 },

    #[error("at least {min} trials are required, got {got}")]
    TooFewTrials { min: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Invalid { field: field.into(), reason: reason.into() }
}
