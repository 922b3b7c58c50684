use thiserror::Error;

/// Errors raised by the forward models, simulations and fits.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input outside the validity window of a model.
    #[error("domain error: {0}")]
    Domain(String),

    /// Grid or kernel too coarse/narrow for the requested operation.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Degenerate least-squares design (e.g. all abscissae equal).
    #[error("rank error: {0}")]
    Rank(String),

    #[error("no data: {0}")]
    EmptyData(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("model evaluation failed for dataset `{dataset}` at point {index}: {message}")]
    Model {
        dataset: String,
        index: usize,
        message: String,
    },

    /// Every restart stopped on the evaluation budget.
    #[error("minimizer did not converge after {restarts} restarts (best chi2 = {best_chi2})")]
    NonConvergence {
        restarts: usize,
        best_chi2: f64,
        best_theta: Vec<f64>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {value}")))
    }
}
