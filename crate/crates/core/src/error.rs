// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors produced by the construction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite sample in {0}")]
    NonFinite(&'static str),

    #[error("supercritical exponent: p = {p} must satisfy 1 < p < {bound}")]
    SupercriticalExponent { p: f64, bound: f64 },

    #[error("inadmissible potential: {0}")]
    Inadmissible(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("Krylov stagnation in {what}: relative residual {residual:.3e} after {iterations} iterations")]
    Stagnation {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("contraction failure: measured rate {rate:.3} after {iterations} iterations")]
    ContractionFailure { rate: f64, iterations: usize },

    #[error("maximizer at interval endpoint r = {r:.6} (interval [{lo:.6}, {hi:.6}])")]
    EndpointMaximizer { r: f64, lo: f64, hi: f64 },

    #[error("tail fit rejected: relative residual {residual:.3e} exceeds {threshold:.1e}")]
    UnresolvedTail { residual: f64, threshold: f64 },

    #[error("configuration: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::SupercriticalExponent { .. }
            | Error::Inadmissible(_)
            | Error::Config(_)
            | Error::GridMismatch(_) => 2,
            Error::NoConvergence { .. }
            | Error::Stagnation { .. }
            | Error::ContractionFailure { .. }
            | Error::EndpointMaximizer { .. }
            | Error::UnresolvedTail { .. }
            | Error::NonFinite(_) => 3,
            Error::Format(_) | Error::Io(_) | Error::Json(_) => 4,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::SupercriticalExponent { .. } => "supercritical_exponent",
            Error::Inadmissible(_) => "inadmissible_potential",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Stagnation { .. } => "krylov_stagnation",
            Error::ContractionFailure { .. } => "contraction_failure",
            Error::EndpointMaximizer { .. } => "endpoint_maximizer",
            Error::UnresolvedTail { .. } => "unresolved_tail",
            Error::Config(_) => "config",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
