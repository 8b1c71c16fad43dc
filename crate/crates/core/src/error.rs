use thiserror::Error;

/// Errors shared across the numerical modules.
#[derive(Error, Debug, Clone)]
pub enum CoreError {
    /// A logarithm argument left its domain while evaluating a spectral
    /// transform. Carries the offending eigenvalue.
    #[error("log-domain violation at eigenvalue {lambda}: 1 - beta*lambda*x = {argument}")]
    LogDomain { lambda: f64, argument: f64 },

    /// A 1-D extremization could not bracket a stationary point. The scanned
    /// grid of (point, gradient) pairs is attached for diagnosis.
    #[error("no extremum bracketed in [{lo}, {hi}]; scanned gradient signs: {scan:?}")]
    NoExtremum {
        lo: f64,
        hi: f64,
        scan: Vec<(f64, f64)>,
    },

    /// Requested value is outside the range a transform can reach.
    #[error("argument {value} outside attainable range ({lo}, {hi})")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An iterative scheme ran out of its iteration budget. `trace` carries
    /// the convergence metric per sweep.
    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
