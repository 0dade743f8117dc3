use thiserror::Error;

/// Errors raised across the pricing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters supplied when building a problem (grid, qubit count, payoff).
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called with arguments that violate its contract.
    #[error("usage error: {0}")]
    Usage(String),

    /// Boundary anchoring could not recover the normalization.
    #[error("anchoring failure: {0}")]
    Anchor(String),

    /// The requested point lies outside the spatial grid.
    #[error("extrapolation error: {0}")]
    Extrapolation(String),

    /// A numerical invariant failed (e.g. a non-PSD metric).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The Euler loop produced a parameter velocity above the divergence guard.
    #[error("divergence at step {step}: |dθ/dτ| = {norm:e}")]
    Divergence {
        step: usize,
        norm: f64,
        partial: Box<crate::varqite::EvolutionTrace>,
    },

    /// Malformed input file.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
