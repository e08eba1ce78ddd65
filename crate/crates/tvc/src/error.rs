use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the physical or numerical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Attitude too close to the representation singularity.
    #[error("pitch angle {theta} rad within {margin} rad of the +-pi/2 singularity")]
    Singularity { theta: f64, margin: f64 },

    /// Malformed lookup table (empty, non-monotone keys, length mismatch).
    #[error("table error: {0}")]
    Table(String),

    /// Riccati solve failed validation or did not converge.
    #[error("riccati error: {0}")]
    Riccati(String),

    /// Linear model does not decouple at the requested operating point.
    #[error("decoupling error: {0}")]
    Decoupling(String),

    /// Gain synthesis failed at one or more operating points.
    #[error("synthesis error: {0}")]
    Synthesis(String),

    /// Scenario or artifact file is malformed or has the wrong schema.
    #[error("config error: {0}")]
    Config(String),

    /// Simulation diverged or violated a runtime invariant.
    #[error("simulation error: {0}")]
    Sim(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
