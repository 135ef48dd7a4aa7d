use thiserror::Error;

/// Errors produced by the simulation, estimation and numerics layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A lattice or run configuration is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// The rescaling by (Γ̃ n)^{1/3} is degenerate (Γ̃ = 0, i.e. λ = 1).
    #[error("degenerate scaling: Gamma_t = 0 at lambda = {lambda}")]
    DegenerateScaling { lambda: f64 },

    /// Not enough samples, batches or lags for the requested statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A checkpoint blob could not be decoded.
    #[error("checkpoint format error (version {version}): {reason}")]
    Format { version: u8, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
