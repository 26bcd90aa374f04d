//! Propensity-score law: maps (r, phi) user inputs to a unique Beta(a, b)
//! score distribution by bisection, converts it to the matched logit-normal
//! law for the latent linear predictor W_e, and computes the arm-conditional
//! moments of W_e that the outcome solve needs.

use crate::error::{Error, Result};
use crate::logit;
use crate::quadrature::{logistic_tilted_moment, GaussianWeight, QuadratureSettings};
use crate::specialfn::{digamma, log_gamma, trigamma};

/// phi values at or above this are treated as the randomized-trial limit.
pub const DEGENERATE_PHI: f64 = 1.0 - 1e-9;

/// User inputs: treatment proportion and overlap coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapSpec {
    pub r: f64,
    pub phi: f64,
}

impl OverlapSpec {
    pub fn new(r: f64, phi: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0 && r < 1.0) {
            return Err(Error::domain(format!("r must be in (0,1), got {r}")));
        }
        if !(phi.is_finite() && phi > 0.0 && phi <= 1.0) {
            return Err(Error::domain(format!("phi must be in (0,1], got {phi}")));
        }
        Ok(OverlapSpec { r, phi })
    }
}

/// Beta(a, b) propensity-score distribution with r = a/(a+b).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPropensity {
    pub a: f64,
    pub b: f64,
}

impl BetaPropensity {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
            return Err(Error::domain(format!("Beta parameters must be > 0, got ({a}, {b})")));
        }
        Ok(BetaPropensity { a, b })
    }

    pub fn r(&self) -> f64 {
        self.a / (self.a + self.b)
    }
}

/// Matched logit-normal law W_e ~ N(mu_e, sigma_e2) with the cached
/// arm-conditional moments E[W_e | Z=z] and V[W_e | Z=z], indexed by z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogitNormalPropensity {
    pub mu_e: f64,
    pub sigma_e2: f64,
    pub cond_mean: [f64; 2],
    pub cond_var: [f64; 2],
}

impl LogitNormalPropensity {
    /// Randomized-trial limit: a point mass at logit(r).
    pub fn degenerate(r: f64) -> Self {
        let m = logit(r);
        LogitNormalPropensity {
            mu_e: m,
            sigma_e2: 0.0,
            cond_mean: [m, m],
            cond_var: [0.0, 0.0],
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma_e2 == 0.0
    }

    pub fn weight(&self) -> Result<GaussianWeight> {
        GaussianWeight::new(self.mu_e, self.sigma_e2)
    }
}

/// Result of the (r, phi) -> Beta solve; phi ~ 1 has no finite Beta solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PropensitySolve {
    Beta(BetaPropensity),
    Degenerate,
}

/// Bhattacharyya overlap coefficient of a Beta(a, b) score law, computed in
/// log space: phi = [Gamma(a+1/2)/(sqrt(a) Gamma(a))] [Gamma(b+1/2)/(sqrt(b) Gamma(b))].
pub fn overlap_from_beta(p: &BetaPropensity) -> Result<f64> {
    let term = |x: f64| -> Result<f64> {
        Ok(log_gamma(x + 0.5)? - log_gamma(x)? - 0.5 * x.ln())
    };
    let phi = (term(p.a)? + term(p.b)?).exp();
    Ok(phi.min(1.0))
}

/// Solves phi(k) = spec.phi for k on Prop.-2's monotone domain
/// k > max{1/(2r), 1/(2(1-r))} and returns (a, b) = (k r, k (1-r)).
pub fn solve_beta(spec: &OverlapSpec, tol: f64) -> Result<PropensitySolve> {
    if !(tol > 0.0 && tol <= 1e-4) {
        return Err(Error::domain(format!("solve tolerance must be in (0, 1e-4], got {tol}")));
    }
    if spec.phi >= DEGENERATE_PHI {
        return Ok(PropensitySolve::Degenerate);
    }
    let r = spec.r;
    let phi_at = |k: f64| -> Result<f64> {
        overlap_from_beta(&BetaPropensity { a: k * r, b: k * (1.0 - r) })
    };

    let k_lo = (1.0 / (2.0 * r)).max(1.0 / (2.0 * (1.0 - r))) * (1.0 + 1e-9);
    let phi_min = phi_at(k_lo)?;
    if spec.phi < phi_min {
        return Err(Error::InfeasibleOverlap {
            requested: spec.phi,
            minimum: phi_min,
            r,
        });
    }

    let mut hi = 2.0 * k_lo;
    while phi_at(hi)? < spec.phi {
        hi *= 2.0;
        if hi > 1e12 {
            // phi(k) -> 1 monotonically; only a phi indistinguishable from 1
            // can exhaust the bracket.
            return Ok(PropensitySolve::Degenerate);
        }
    }

    let mut lo = k_lo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let val = phi_at(mid)?;
        if (val - spec.phi).abs() <= tol && (hi - lo) <= 1e-9 * mid {
            break;
        }
        if val < spec.phi {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    Ok(PropensitySolve::Beta(BetaPropensity { a: k * r, b: k * (1.0 - r) }))
}

/// Converts a Beta law to its matched logit-normal law via
/// mu_e = psi(a) - psi(b), sigma_e2 = psi'(a) + psi'(b), and fills the
/// conditional moments from ratios of logistic-tilted Gaussian integrals.
pub fn beta_to_logitnormal(
    p: &BetaPropensity,
    q: &QuadratureSettings,
) -> Result<LogitNormalPropensity> {
    let mu_e = digamma(p.a)? - digamma(p.b)?;
    let sigma_e2 = trigamma(p.a)? + trigamma(p.b)?;
    let w = GaussianWeight::new(mu_e, sigma_e2)?;
    let mut cond_mean = [0.0; 2];
    let mut cond_var = [0.0; 2];
    for z in 0..2u8 {
        let m0 = logistic_tilted_moment(0, z, &w, q)?;
        let m1 = logistic_tilted_moment(1, z, &w, q)?;
        let m2 = logistic_tilted_moment(2, z, &w, q)?;
        let mean = m1 / m0;
        cond_mean[z as usize] = mean;
        cond_var[z as usize] = m2 / m0 - mean * mean;
    }
    Ok(LogitNormalPropensity { mu_e, sigma_e2, cond_mean, cond_var })
}

/// Full (r, phi) -> logit-normal pipeline, handling the degenerate limit.
pub fn law_from_spec(
    spec: &OverlapSpec,
    tol: f64,
    q: &QuadratureSettings,
) -> Result<LogitNormalPropensity> {
    match solve_beta(spec, tol)? {
        PropensitySolve::Degenerate => Ok(LogitNormalPropensity::degenerate(spec.r)),
        PropensitySolve::Beta(p) => beta_to_logitnormal(&p, q),
    }
}

/// Empirical overlap coefficient from fitted scores:
/// (1/n) sum sqrt(e_i (1 - e_i)) / sqrt(r (1 - r)).
pub fn overlap_from_scores(scores: &[f64], r: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::domain("empty score vector"));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::domain(format!("r must be in (0,1), got {r}")));
    }
    let mut sum = 0.0;
    for &e in scores {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::domain(format!("score out of (0,1): {e}")));
        }
        sum += (e * (1.0 - e)).sqrt();
    }
    Ok(sum / scores.len() as f64 / (r * (1.0 - r)).sqrt())
}
