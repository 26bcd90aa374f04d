use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// An input is outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested overlap coefficient cannot be realized at the given
    /// treatment proportion.
    #[error(
        "infeasible overlap: phi = {requested} is below the minimum attainable \
         phi = {minimum:.6} at r = {r}"
    )]
    InfeasibleOverlap {
        requested: f64,
        minimum: f64,
        r: f64,
    },

    /// Adaptive quadrature exhausted its subdivision budget.
    #[error(
        "quadrature did not converge: last estimate {estimate}, \
         error bound {error_bound}"
    )]
    QuadratureConvergence { estimate: f64, error_bound: f64 },

    /// Inputs that are mutually contradictory (e.g. a constant latent score
    /// paired with a nonzero outcome correlation).
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    /// The supplied correlation exceeds its R-squared bound.
    #[error("rho^2 = {rho2} exceeds the R-squared bound {bound}")]
    RhoBoundViolation { rho2: f64, bound: f64 },

    /// A matrix required by an estimator is singular.
    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    /// Iterative fitting failed to converge.
    #[error("no convergence after {iterations} iterations (last gradient norm {gradient_norm})")]
    NoConvergence {
        iterations: usize,
        gradient_norm: f64,
    },

    /// A data-dependent estimation failure (empty arm, degenerate variance).
    #[error("estimation error: {0}")]
    Estimation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
