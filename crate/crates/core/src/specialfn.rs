//! Scalar special functions: log-gamma, digamma and trigamma.
//!
//! All three use the same strategy: shift the argument up by the recurrence
//! until it is large enough for the asymptotic (Stirling-type) series, then
//! undo the shift. This keeps the implementations dependency-free and well
//! inside the accuracy budget of the downstream bisection solves.

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_74;
/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Minimum argument for the asymptotic series.
const SHIFT_THRESHOLD: f64 = 12.0;

fn check_positive(x: f64, name: &str) -> Result<()> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!(
            "{name} requires a finite argument > 0, got {x}"
        )));
    }
    Ok(())
}

/// ln Gamma(x) for x > 0.
pub fn log_gamma(x: f64) -> Result<f64> {
    check_positive(x, "log_gamma")?;
    Ok(log_gamma_raw(x))
}

pub(crate) fn log_gamma_raw(x: f64) -> f64 {
    // lnGamma(x) = lnGamma(x + n) - sum ln(x + i)
    let mut shift = 0.0;
    let mut z = x;
    while z < SHIFT_THRESHOLD {
        shift += z.ln();
        z += 1.0;
    }
    // Stirling series with Bernoulli coefficients B_2n / (2n (2n-1)).
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 360.0
                    + inv2
                        * (1.0 / 1260.0
                            + inv2
                                * (-1.0 / 1680.0
                                    + inv2 * (1.0 / 1188.0 + inv2 * (-691.0 / 360_360.0))))));
    (z - 0.5) * z.ln() - z + LN_SQRT_2PI + series - shift
}

/// Digamma psi(x) for x > 0.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive(x, "digamma")?;
    Ok(digamma_raw(x))
}

pub(crate) fn digamma_raw(x: f64) -> f64 {
    let mut acc = 0.0;
    let mut z = x;
    while z < SHIFT_THRESHOLD {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let series = inv2
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 120.0
                    + inv2 * (1.0 / 252.0 + inv2 * (-1.0 / 240.0 + inv2 * (1.0 / 132.0)))));
    acc + z.ln() - 0.5 * inv - series
}

/// Trigamma psi'(x) for x > 0.
pub fn trigamma(x: f64) -> Result<f64> {
    check_positive(x, "trigamma")?;
    Ok(trigamma_raw(x))
}

pub(crate) fn trigamma_raw(x: f64) -> f64 {
    let mut acc = 0.0;
    let mut z = x;
    while z < SHIFT_THRESHOLD {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let series = inv
        * (1.0
            + inv
                * (0.5
                    + inv
                        * (1.0 / 6.0
                            + inv2
                                * (-1.0 / 30.0
                                    + inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0 + inv2 * (5.0 / 66.0)))))));
    acc + series
}
