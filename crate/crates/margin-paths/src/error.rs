use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("{context}: not converged after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        context: String,
        iterations: usize,
        residual: f64,
    },

    #[error(
        "descent inequality violated at step {step} (residual {residual:.3e}); \
         the step size is too large for this risk"
    )]
    DescentViolation { step: usize, residual: f64 },

    #[error("non-finite {what} at step {step}")]
    NonFinite { step: usize, what: String },

    #[error("lp solver failed on point {index}: {reason}")]
    Lp { index: usize, reason: String },

    #[error(
        "no norm-matched pairs: trace norms reach {trace_hi:.4} but the path \
         radii span [{path_lo:.4}, {path_hi:.4}]"
    )]
    Coverage {
        trace_hi: f64,
        path_lo: f64,
        path_hi: f64,
    },

    #[error(
        "direction not converged (consecutive angle {angle:.3e}, decreasing: {decreasing}); \
         extend the path before checking margin bounds"
    )]
    StaleDirection { angle: f64, decreasing: bool },

    #[error(
        "angular separation {separation:.6} of the two tail directions is below 0.05; \
         inconclusive at this n, rerun with a larger dataset"
    )]
    Inconclusive { separation: f64 },

    #[error("io error")]
    Io(#[from] std::io::Error),

    #[error("json error")]
    Json(#[from] serde_json::Error),
}
