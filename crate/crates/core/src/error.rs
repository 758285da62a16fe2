use thiserror::Error;

use crate::eigensolve::EigenResult;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, Error)]
pub enum Error {
    #[error("symplectic class is not integral: period {period} on plane {plane}")]
    NonIntegralClass { plane: usize, period: f64 },

    #[error("lattice resolution {0} is below the minimum of 4")]
    Resolution(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("chern data {given:?} does not match the periods {expected:?} of the symplectic form")]
    ChernMismatch { given: Vec<i64>, expected: Vec<i64> },

    #[error("the sphere model has no lattice; use the analytic spectral backend")]
    AnalyticBackend,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("operator dimension {dim} exceeds the limit {limit}")]
    TooLarge { dim: usize, limit: usize },

    #[error("curvature input is not antisymmetric at ({0}, {1})")]
    NonAntisymmetric(usize, usize),

    #[error("operator carries no parity grading")]
    Ungraded,

    #[error("lanczos did not converge: {} of {wanted} eigenvalues after {matvecs} matvecs", partial.eigenvalues.len())]
    NotConverged { wanted: usize, matvecs: usize, partial: Box<EigenResult> },

    #[error("dense eigensolver failed to converge at index {0}")]
    DenseNoConvergence(usize),

    #[error("indeterminate count: eigenvalue {value} lies within {tolerance} of window edge {edge}")]
    IndeterminateCount { value: f64, edge: f64, tolerance: f64 },

    #[error("window ({lo}, {hi}) extends past the computed part of the spectrum (largest {computed})")]
    WindowBeyondSpectrum { lo: f64, hi: f64, computed: f64 },

    #[error("kernel separation indeterminate at k = {k}: eigenvalue {value} between threshold {threshold} and {guard}")]
    IndeterminateSeparation { k: u32, value: f64, threshold: f64, guard: f64 },

    #[error("degree-0 component of kernel vector {index} at k = {k} is numerically zero (norm {norm})")]
    VanishingDegreeZero { k: u32, index: usize, norm: f64 },

    #[error("gauge transport is inconsistent at site {site} (defect {defect})")]
    GaugeInconsistent { site: usize, defect: f64 },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
