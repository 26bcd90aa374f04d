//! Sample-size and power engine for inverse-probability-weighted
//! observational studies, driven by summary inputs (treatment proportion r,
//! overlap coefficient phi, confounder-outcome correlation rho^2, effect
//! size), plus a Monte Carlo harness that validates the analytic engine
//! end to end.

pub mod cli;
pub mod design;
pub mod error;
pub mod normal;
pub mod outcome;
pub mod propensity;
pub mod quadrature;
pub mod simharness;
pub mod specialfn;
pub mod variance;

pub use error::{Error, Result};

/// Logistic function 1/(1 + e^{-x}), stable for large |x|.
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`expit`] for p in (0, 1).
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
