//! Error type shared across the crate.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    Kernel(String),

    #[error("kernel violates the admissibility assumptions: {0}")]
    Assumption(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("the {0} formulation requires an exponential kernel")]
    NonExponentialKernel(&'static str),

    #[error("resolvent system is near-singular at lambda = {lambda}; estimated distance to the spectrum {distance:.3e}")]
    NearSingular { lambda: String, distance: f64 },

    #[error("eigensolver failed to converge: {0}")]
    Eigensolver(String),

    #[error("energy increased by {increase:.3e} (relative to E(0)) at step {step}")]
    EnergyIncrease { step: usize, increase: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization failed: {0}")]
    Serialization(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
