use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("lattice mismatch: N={left_n}, L={left_l} vs N={right_n}, L={right_l}")]
    LatticeMismatch {
        left_n: usize,
        left_l: f64,
        right_n: usize,
        right_l: f64,
    },

    #[error("field is not solenoidal (max |k.c(k)| = {defect:e})")]
    NotSolenoidal { defect: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite state at step {step} (t = {time}); the time step is probably too large")]
    BlowUp { step: usize, time: f64 },

    #[error("beta = {beta} violates 2*beta*C_alpha < 1 (limit {limit})")]
    InadmissibleBeta { beta: f64, limit: f64 },

    #[error("trajectory carries no noise increments")]
    MissingNoisePath,

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("ensemble too small: {got} decorrelated snapshots, need at least {need}")]
    EnsembleTooSmall { got: usize, need: usize },

    #[error("noise trace vanishes; the balance residual is undefined")]
    ZeroTrace,

    #[error("{failed} of {total} replicas failed")]
    ReplicaFailures { failed: usize, total: usize },

    #[error("configuration error:\n{0}")]
    Config(#[from] crate::config::ConfigError),

    #[error("snapshot {path}: {reason}")]
    Snapshot { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> SimError {
    SimError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
