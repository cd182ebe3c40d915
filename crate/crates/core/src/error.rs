use thiserror::Error;

/// Errors raised by the simulator and the verification pipelines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("root {k} did not converge after {iterations} iterations; bracket [{lo}, {hi}], residual {residual:e}")]
    NonConvergence {
        k: usize,
        lo: f64,
        hi: f64,
        residual: f64,
        iterations: usize,
    },
    #[error("non-finite state in mode {mode} at step {step}")]
    NonFinite { mode: usize, step: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
