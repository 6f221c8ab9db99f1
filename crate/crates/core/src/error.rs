use std::path::PathBuf;

use thiserror::Error;

use crate::dynamics::SimState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input (shapes, preconditions, bad data).
    #[error("input error: {0}")]
    Input(String),

    #[error("{solver} did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    Solver {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Non-finite velocity during time stepping. Carries the last finite state.
    #[error("solution diverged at t = {t} (step {step}): {reason}")]
    Divergence {
        t: f64,
        step: u64,
        reason: String,
        state: Box<SimState>,
    },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("format error in {path:?}: {message}")]
    Format { path: PathBuf, message: String },

    /// A checked property of the run did not hold.
    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Process exit code used by the CLI: 2 for failed assertions, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Assertion(_) => 2,
            _ => 3,
        }
    }
}
