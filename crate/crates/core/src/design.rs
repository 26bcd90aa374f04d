//! Top-level design computations: minimal sample size, power at a given n,
//! the randomized-trial z-test baseline, and sensitivity grids over
//! (phi, rho2).

use crate::error::{Error, Result};
use crate::normal;
use crate::outcome::{rho_bound_check, solve_outcome_model, OutcomeSummary, RSquaredBound};
use crate::propensity::{
    beta_to_logitnormal, solve_beta, LogitNormalPropensity, OverlapSpec, PropensitySolve,
};
use crate::quadrature::QuadratureSettings;
use crate::variance::{ate_variance_std, wate_variance, TiltingFunction, VarianceBreakdown};
use serde::{Deserialize, Serialize};

/// Default bisection tolerance for the (r, phi) -> Beta solve.
pub const SOLVE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sidedness {
    One,
    Two,
}

/// Everything needed to size a study.
#[derive(Debug, Clone, Copy)]
pub struct DesignInputs {
    pub alpha: f64,
    pub beta: f64,
    /// Standardized effect size tau / S.
    pub tau_std: f64,
    pub sidedness: Sidedness,
    pub estimand: TiltingFunction,
    pub overlap: OverlapSpec,
    pub rho2: f64,
    pub r2_bound: Option<RSquaredBound>,
    /// Optional standardized variance under estimated scores for the exact
    /// two-variance form of the power equation.
    pub v0_override: Option<f64>,
}

impl DesignInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::domain(format!("alpha must be in (0, 0.5), got {}", self.alpha)));
        }
        if !(self.beta > 0.5 && self.beta < 1.0) {
            return Err(Error::domain(format!(
                "target power must be in (0.5, 1), got {}",
                self.beta
            )));
        }
        if !(self.tau_std > 0.0 && self.tau_std.is_finite()) {
            return Err(Error::domain(format!(
                "standardized effect size must be > 0, got {}",
                self.tau_std
            )));
        }
        if !(0.0..1.0).contains(&self.rho2) {
            return Err(Error::domain(format!("rho2 must be in [0,1), got {}", self.rho2)));
        }
        if let Some(bound) = &self.r2_bound {
            if !rho_bound_check(self.rho2, bound) {
                return Err(Error::RhoBoundViolation { rho2: self.rho2, bound: bound.r2 });
            }
        }
        if let Some(v0) = self.v0_override {
            if !(v0 > 0.0) {
                return Err(Error::domain(format!("v0 override must be > 0, got {v0}")));
            }
        }
        Ok(())
    }

    fn z_q(&self) -> f64 {
        match self.sidedness {
            Sidedness::Two => normal::quantile(1.0 - self.alpha / 2.0),
            Sidedness::One => normal::quantile(1.0 - self.alpha),
        }
    }
}

/// The solved parameter chain behind a design result.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DesignTrace {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub mu_e: f64,
    pub sigma_e2: f64,
    pub cond_var: [f64; 2],
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DesignResult {
    pub n: u64,
    pub power: f64,
    pub variance: VarianceBreakdown,
    pub trace: DesignTrace,
}

fn solve_law(spec: &OverlapSpec) -> Result<(LogitNormalPropensity, Option<(f64, f64)>)> {
    match solve_beta(spec, SOLVE_TOL)? {
        PropensitySolve::Degenerate => Ok((LogitNormalPropensity::degenerate(spec.r), None)),
        PropensitySolve::Beta(p) => {
            let law = beta_to_logitnormal(&p, &QuadratureSettings::default())?;
            Ok((law, Some((p.a, p.b))))
        }
    }
}

/// Standardized variance for the chosen estimand, decomposed so that
/// v_total = v_sh + rho2 * v_adj (v_sh is the rho2 = 0 value).
fn estimand_variance(
    estimand: TiltingFunction,
    ps: &LogitNormalPropensity,
    rho2: f64,
) -> Result<VarianceBreakdown> {
    match estimand {
        TiltingFunction::Ate => ate_variance_std(ps, rho2),
        h => {
            let q = QuadratureSettings::default();
            let model = |r2: f64| -> Result<_> {
                solve_outcome_model(&OutcomeSummary::pooled(0.0, 0.0, 1.0, r2.sqrt())?, ps)
            };
            let v_sh = wate_variance(h, &model(0.0)?, ps, &q)?;
            if rho2 == 0.0 {
                return Ok(VarianceBreakdown { v_total: v_sh, v_sh, v_adj: 0.0 });
            }
            let v_total = wate_variance(h, &model(rho2)?, ps, &q)?;
            Ok(VarianceBreakdown { v_total, v_sh, v_adj: (v_total - v_sh) / rho2 })
        }
    }
}

/// Minimal sample size achieving the target power.
pub fn sample_size(d: &DesignInputs) -> Result<DesignResult> {
    d.validate()?;
    let (ps, ab) = solve_law(&d.overlap)?;
    let variance = estimand_variance(d.estimand, &ps, d.rho2)?;
    let z_q = d.z_q();
    let z_b = normal::quantile(d.beta);
    let raw = match d.v0_override {
        None => variance.v_total * (z_q + z_b) * (z_q + z_b) / (d.tau_std * d.tau_std),
        Some(v0) => {
            let s = z_q * variance.v_total.sqrt() + z_b * v0.sqrt();
            s * s / (d.tau_std * d.tau_std)
        }
    };
    let n = (raw.ceil() as u64).max(2);
    let trace = DesignTrace {
        a: ab.map(|p| p.0),
        b: ab.map(|p| p.1),
        mu_e: ps.mu_e,
        sigma_e2: ps.sigma_e2,
        cond_var: ps.cond_var,
    };
    let power = power_value(d, &variance, n);
    Ok(DesignResult { n, power, variance, trace })
}

fn power_value(d: &DesignInputs, variance: &VarianceBreakdown, n: u64) -> f64 {
    let z_q = d.z_q();
    let v = variance.v_total;
    let arg = match d.v0_override {
        None => z_q - d.tau_std * (n as f64 / v).sqrt(),
        Some(v0) => (z_q * v.sqrt() - d.tau_std * (n as f64).sqrt()) / v0.sqrt(),
    };
    1.0 - normal::cdf(arg)
}

/// Power of the level-alpha test at sample size n.
pub fn power_at(d: &DesignInputs, n: u64) -> Result<f64> {
    d.validate()?;
    if n < 2 {
        return Err(Error::domain(format!("n must be >= 2, got {n}")));
    }
    let (ps, _) = solve_law(&d.overlap)?;
    let variance = estimand_variance(d.estimand, &ps, d.rho2)?;
    Ok(power_value(d, &variance, n))
}

/// Randomized-trial z-test sample size ceil((z_q + z_b)^2 / (r(1-r) tau^2)).
pub fn ztest_size(
    alpha: f64,
    beta: f64,
    r: f64,
    tau_std: f64,
    sidedness: Sidedness,
) -> Result<u64> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::domain(format!("alpha must be in (0, 0.5), got {alpha}")));
    }
    if !(beta > 0.5 && beta < 1.0) {
        return Err(Error::domain(format!("target power must be in (0.5, 1), got {beta}")));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::domain(format!("r must be in (0,1), got {r}")));
    }
    if !(tau_std > 0.0) {
        return Err(Error::domain(format!("effect size must be > 0, got {tau_std}")));
    }
    let z_q = match sidedness {
        Sidedness::Two => normal::quantile(1.0 - alpha / 2.0),
        Sidedness::One => normal::quantile(1.0 - alpha),
    };
    let z_b = normal::quantile(beta);
    let raw = (z_q + z_b) * (z_q + z_b) / (r * (1.0 - r) * tau_std * tau_std);
    Ok((raw.ceil() as u64).max(2))
}

/// One grid cell of a sensitivity analysis.
#[derive(Debug)]
pub struct SensitivityCell {
    pub phi: f64,
    pub rho2: f64,
    pub outcome: Result<DesignResult>,
}

/// Designs over the cartesian grid of phi and rho2 values, rows ordered by
/// (phi descending, rho2 ascending). Per-cell failures are recorded in the
/// cell; the grid always completes.
pub fn sensitivity_grid(
    base: &DesignInputs,
    phis: &[f64],
    rho2s: &[f64],
) -> Result<Vec<SensitivityCell>> {
    if phis.is_empty() || rho2s.is_empty() {
        return Err(Error::domain("sensitivity grid needs non-empty phi and rho2 lists"));
    }
    let mut phis = phis.to_vec();
    phis.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut rho2s = rho2s.to_vec();
    rho2s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut cells = Vec::with_capacity(phis.len() * rho2s.len());
    for &phi in &phis {
        for &rho2 in &rho2s {
            let outcome = OverlapSpec::new(base.overlap.r, phi).and_then(|overlap| {
                sample_size(&DesignInputs { overlap, rho2, ..*base })
            });
            cells.push(SensitivityCell { phi, rho2, outcome });
        }
    }
    Ok(cells)
}
