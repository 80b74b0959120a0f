use thiserror::Error;

/// Error type shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Walk-enumeration order exceeds the configured cap.
    #[error("walk order {n} exceeds enumeration cap {cap}; class count grows exponentially")]
    OrderCap { n: usize, cap: usize },

    /// Brute-force enumeration requested beyond desk scale.
    #[error("brute-force enumeration capped at n <= {n_cap}, q <= {q_cap} (got n = {n}, q = {q})")]
    BruteForceCap {
        n: usize,
        q: u64,
        n_cap: usize,
        q_cap: u64,
    },

    /// Invalid window geometry.
    #[error("invalid analytic window: {0}")]
    Window(String),

    /// Invalid single-site law.
    #[error("invalid single-site law: {0}")]
    Law(String),

    /// Evaluation point outside the domain of the requested operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge: achieved error estimate {achieved:.3e} (target {target:.3e})")]
    QuadratureNonConvergence { achieved: f64, target: f64 },

    /// Transform index k = 0 is not defined.
    #[error("transform index k must be >= 1")]
    TransformIndex,

    /// Evaluation at a pole of a closed-form transform.
    #[error("evaluation at pole: {0}")]
    Pole(String),

    /// Invalid Monte Carlo configuration.
    #[error("invalid Monte Carlo configuration: {0}")]
    McConfig(String),

    /// Configuration file or flag parsing problem.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
