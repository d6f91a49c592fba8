//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by spectral operations, solvers and the harness.
#[derive(Debug, Error)]
pub enum FluxError {
    /// Invalid grid parameters or mismatched grids between operands.
    #[error("grid error: {0}")]
    Grid(String),

    /// Invalid configuration value or unknown configuration key.
    #[error("config error: {0}")]
    Config(String),

    /// A parameter condition cannot be satisfied (empty feasible interval).
    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    /// The time integration left the stability region (non-finite state or
    /// magnitude above the blow-up threshold).
    #[error("solver blow-up at t = {t}")]
    BlowUp {
        /// Simulation time at which the abort triggered.
        t: f64,
    },

    /// A stability bound on the time step was violated.
    #[error("time step too large: {0}")]
    TimeStep(String),

    /// Malformed binary snapshot, archive manifest, or map descriptor.
    #[error("format error: {0}")]
    Format(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenient result alias.
pub type Result<T> = std::result::Result<T, FluxError>;
