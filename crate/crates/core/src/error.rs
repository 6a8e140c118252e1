use thiserror::Error;

/// Errors raised by the toolkit.
///
/// The variants map onto the CLI exit-code classes: input problems,
/// numerical failures, and infeasible or failed optimizations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("power flow diverged after {iterations} iterations (last max |dV| = {last_step:.3e})")]
    Diverged { iterations: usize, last_step: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("not enough data: {0}")]
    NotEnoughData(String),

    #[error("no thermal recovery predicted: {0}")]
    NeverTrips(String),

    #[error("no recovery estimate: {0}")]
    NoRecoveryEstimate(String),

    #[error("linear program infeasible; best achievable change per constraint: {max_achievable:?}")]
    Infeasible { max_achievable: Vec<f64> },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("simulation collapsed at t = {t:.3} s: {reason}")]
    Collapsed { t: f64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
