//! Latent potential-outcome model Y(z) = a_z W_e + eps_z solved from
//! observed-arm summaries (E_z, S_z^2, rho_z), plus the rho-R^2 feasibility
//! bound.

use crate::error::{Error, Result};
use crate::propensity::LogitNormalPropensity;

/// Observed per-arm summaries of the outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeSummary {
    pub e1: f64,
    pub e0: f64,
    pub s1_2: f64,
    pub s0_2: f64,
    pub rho1: f64,
    pub rho0: f64,
}

impl OutcomeSummary {
    pub fn new(e1: f64, e0: f64, s1_2: f64, s0_2: f64, rho1: f64, rho0: f64) -> Result<Self> {
        if !(s1_2 > 0.0 && s0_2 > 0.0 && s1_2.is_finite() && s0_2.is_finite()) {
            return Err(Error::domain(format!(
                "arm variances must be positive, got ({s1_2}, {s0_2})"
            )));
        }
        for rho in [rho1, rho0] {
            if !(rho > -1.0 && rho < 1.0) {
                return Err(Error::domain(format!("rho must be in (-1,1), got {rho}")));
            }
        }
        if !(e1.is_finite() && e0.is_finite()) {
            return Err(Error::domain("arm means must be finite"));
        }
        Ok(OutcomeSummary { e1, e0, s1_2, s0_2, rho1, rho0 })
    }

    /// Pooled convention S1^2 = S0^2 = S^2 and rho1 = rho0 = rho.
    pub fn pooled(e1: f64, e0: f64, s2: f64, rho: f64) -> Result<Self> {
        OutcomeSummary::new(e1, e0, s2, s2, rho, rho)
    }
}

/// Solved latent model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeModel {
    pub a1: f64,
    pub a0: f64,
    pub mu1: f64,
    pub mu0: f64,
    pub sigma1_2: f64,
    pub sigma0_2: f64,
}

impl OutcomeModel {
    pub fn slope(&self, z: usize) -> f64 {
        if z == 1 { self.a1 } else { self.a0 }
    }

    pub fn intercept(&self, z: usize) -> f64 {
        if z == 1 { self.mu1 } else { self.mu0 }
    }

    pub fn resid_var(&self, z: usize) -> f64 {
        if z == 1 { self.sigma1_2 } else { self.sigma0_2 }
    }
}

/// Upper bound R^2 on the admissible rho^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RSquaredBound {
    pub r2: f64,
}

impl RSquaredBound {
    pub fn new(r2: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&r2) {
            return Err(Error::domain(format!("R^2 bound must be in [0,1), got {r2}")));
        }
        Ok(RSquaredBound { r2 })
    }
}

/// True iff rho^2 is admissible under the bound.
pub fn rho_bound_check(rho2: f64, bound: &RSquaredBound) -> bool {
    rho2 <= bound.r2
}

/// Solves (a_z, mu_z, sigma_z^2) from arm summaries and the score law:
/// a_z = rho_z sqrt(S_z^2 / V(W_e|Z=z)), mu_z = E_z - a_z E(W_e|Z=z),
/// sigma_z^2 = (1 - rho_z^2) S_z^2.
pub fn solve_outcome_model(
    s: &OutcomeSummary,
    ps: &LogitNormalPropensity,
) -> Result<OutcomeModel> {
    let solve_arm = |z: usize, s2: f64, rho: f64, ez: f64| -> Result<(f64, f64, f64)> {
        let cv = ps.cond_var[z];
        let a = if cv > 0.0 {
            rho * (s2 / cv).sqrt()
        } else if rho == 0.0 {
            0.0
        } else {
            return Err(Error::Inconsistent(format!(
                "arm {z} has a constant latent score but rho = {rho} != 0"
            )));
        };
        Ok((a, ez - a * ps.cond_mean[z], (1.0 - rho * rho) * s2))
    };
    let (a1, mu1, sigma1_2) = solve_arm(1, s.s1_2, s.rho1, s.e1)?;
    let (a0, mu0, sigma0_2) = solve_arm(0, s.s0_2, s.rho0, s.e0)?;
    Ok(OutcomeModel { a1, a0, mu1, mu0, sigma1_2, sigma0_2 })
}
