use thiserror::Error;

/// Errors produced by the estimation, alignment, codec and I/O routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid camera: {0}")]
    InvalidCamera(&'static str),
    #[error("invalid box: {0}")]
    InvalidBox(&'static str),
    #[error("point at non-positive depth z = {0}")]
    NonPositiveDepth(f64),

    #[error("only {valid} valid measurements, at least 4 are required")]
    TooFewMeasurements { valid: usize },
    #[error("normal equations are singular (rank-deficient Jacobian)")]
    SingularNormalEquations,
    #[error("solver diverged: residual grew for {0} consecutive damped steps")]
    DivergedSolve(usize),
    #[error("depth cannot be initialised from the available measurements")]
    UnobservableDepth,
    #[error("coarse solve did not converge")]
    CoarseNotConverged,

    #[error("valid RoI is empty")]
    EmptyRoi,
    #[error("warp depth z + dz = {0} is not positive")]
    NonPositiveWarpDepth(f64),
    #[error("every candidate depth violates z + dz > 0")]
    AllCandidatesInvalid,
    #[error("image patch: {0}")]
    InvalidPatch(&'static str),

    #[error("anchor of size {width}x{height} px is degenerate")]
    DegenerateAnchor { width: f64, height: f64 },
    #[error("dimensions must be positive")]
    NonPositiveDimension,

    #[error("no ground-truth objects to evaluate against")]
    NoGroundTruth,

    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("calibration matrix {0} missing")]
    MissingMatrix(&'static str),
    #[error("P2/P3 are not a rectified pair: {0}")]
    NonRectifiedPair(String),
    #[error("scene file line {line}: {reason}")]
    MalformedScene { line: usize, reason: String },
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
