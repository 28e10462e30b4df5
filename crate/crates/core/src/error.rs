use thiserror::Error;

/// Errors raised by model construction, filtering and estimation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "non-finite {quantity} at t = {time}; the step h = {step} likely violates the stiffness guard h <= eps/(20 b K)"
    )]
    Stiffness {
        quantity: &'static str,
        time: f64,
        step: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("candidate theta = {theta} lies outside [{alpha}, {beta}]")]
    OutOfRange { theta: f64, alpha: f64, beta: f64 },

    #[error("kernel support [{lo}, {hi}] overflows the observation window [0, {horizon}]")]
    KernelBoundary { lo: f64, hi: f64, horizon: f64 },

    #[error("root not found: {0}")]
    RootNotFound(String),

    #[error("frequency not identifiable: {0}")]
    Unidentifiable(String),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("experiment aborted: {0}")]
    PlanAborted(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
