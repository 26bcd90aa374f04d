//! Asymptotic variance of the Hajek estimator: the standardized closed form,
//! the raw (outcome-units) form, numerically integrated weighted-estimand
//! (ATT/ATO) variances, and the empirical sandwich estimator.

use crate::error::{Error, Result};
use crate::expit;
use crate::outcome::OutcomeModel;
use crate::propensity::LogitNormalPropensity;
use crate::quadrature::{gaussian_expectation, QuadratureSettings};
use crate::simharness::Dataset;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Standardized design variance and its decomposition
/// v_total = v_sh + rho2 * v_adj.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceBreakdown {
    pub v_total: f64,
    pub v_sh: f64,
    pub v_adj: f64,
}

/// Tilting function selecting the target population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiltingFunction {
    Ate,
    Att,
    Ato,
}

impl TiltingFunction {
    /// h as a function of the latent linear predictor w.
    pub fn h(&self, w: f64) -> f64 {
        let e = expit(w);
        match self {
            TiltingFunction::Ate => 1.0,
            TiltingFunction::Att => e,
            TiltingFunction::Ato => e * (1.0 - e),
        }
    }

    /// Arm weights (w1, w0) = (h/e, h/(1-e)) as functions of the score e.
    pub fn arm_weights(&self, e: f64) -> (f64, f64) {
        match self {
            TiltingFunction::Ate => (1.0 / e, 1.0 / (1.0 - e)),
            TiltingFunction::Att => (1.0, e / (1.0 - e)),
            TiltingFunction::Ato => (1.0 - e, e),
        }
    }

    /// Derivatives (dw1/de, dw0/de) of the arm weights.
    fn arm_weight_derivs(&self, e: f64) -> (f64, f64) {
        match self {
            TiltingFunction::Ate => (-1.0 / (e * e), 1.0 / ((1.0 - e) * (1.0 - e))),
            TiltingFunction::Att => (0.0, 1.0 / ((1.0 - e) * (1.0 - e))),
            TiltingFunction::Ato => (-1.0, 1.0),
        }
    }
}

fn check_rho2(rho2: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho2) {
        return Err(Error::domain(format!("rho2 must be in [0,1), got {rho2}")));
    }
    Ok(())
}

/// Standardized ATE variance. In the degenerate (randomized) limit this is
/// 2 + e^{-mu} + e^{mu} = 1/(r(1-r)); otherwise the closed form in terms of
/// (mu_e, sigma_e2, conditional variances, rho2).
pub fn ate_variance_std(ps: &LogitNormalPropensity, rho2: f64) -> Result<VarianceBreakdown> {
    check_rho2(rho2)?;
    if ps.is_degenerate() {
        let v = 2.0 + (-ps.mu_e).exp() + ps.mu_e.exp();
        return Ok(VarianceBreakdown { v_total: v, v_sh: v, v_adj: 0.0 });
    }
    let s2 = ps.sigma_e2;
    let (sv1, sv0) = (ps.cond_var[1], ps.cond_var[0]);
    if (sv1 <= 0.0 || sv0 <= 0.0) && rho2 > 0.0 {
        return Err(Error::Inconsistent(format!(
            "zero conditional variance with sigma_e2 = {s2} and rho2 = {rho2}"
        )));
    }
    let ep = (-ps.mu_e + 0.5 * s2).exp();
    let em = (ps.mu_e + 0.5 * s2).exp();
    let v_sh = 2.0 + ep + em;
    let g = s2 * (s2 + 1.0);
    let v_adj = (s2 / sv1 + s2 / sv0 - 2.0) + (g / sv1 - 1.0) * ep + (g / sv0 - 1.0) * em;
    Ok(VarianceBreakdown { v_total: v_sh + rho2 * v_adj, v_sh, v_adj })
}

/// Raw ATE variance in outcome units:
/// V = (a1^2 + a0^2) sigma_e2 + (s1^2 + s0^2)
///   + [a1^2 sigma_e2 (sigma_e2 + 1) + s1^2] e^{-mu_e + sigma_e2/2}
///   + [a0^2 sigma_e2 (sigma_e2 + 1) + s0^2] e^{mu_e + sigma_e2/2}.
pub fn ate_variance_raw(m: &OutcomeModel, ps: &LogitNormalPropensity) -> f64 {
    let s2 = ps.sigma_e2;
    let ep = (-ps.mu_e + 0.5 * s2).exp();
    let em = (ps.mu_e + 0.5 * s2).exp();
    let (a1s, a0s) = (m.a1 * m.a1, m.a0 * m.a0);
    (a1s + a0s) * s2
        + (m.sigma1_2 + m.sigma0_2)
        + (a1s * s2 * (s2 + 1.0) + m.sigma1_2) * ep
        + (a0s * s2 * (s2 + 1.0) + m.sigma0_2) * em
}

/// Weighted-estimand variance, integrated numerically:
/// V_w = E[{(Y(1)-xi1)^2/e + (Y(0)-xi0)^2/(1-e)} h^2] / E[h^2]
/// with xi_z = E[h Y(z)] / E[h].
pub fn wate_variance(
    h: TiltingFunction,
    m: &OutcomeModel,
    ps: &LogitNormalPropensity,
    q: &QuadratureSettings,
) -> Result<f64> {
    if ps.is_degenerate() {
        // Constant score e = r: weights cancel and centering is exact.
        let e = expit(ps.mu_e);
        return Ok(m.sigma1_2 / e + m.sigma0_2 / (1.0 - e));
    }
    let w = ps.weight()?;
    let eh = gaussian_expectation(|x| h.h(x), &w, q)?;
    let ehw = gaussian_expectation(|x| h.h(x) * x, &w, q)?;
    let eh2 = gaussian_expectation(|x| h.h(x) * h.h(x), &w, q)?;
    if eh <= 0.0 || eh2 <= 0.0 {
        return Err(Error::Estimation("tilting function integrated to zero mass".into()));
    }
    // Centered xi_z: the intercepts mu_z drop out of (Y(z) - xi_z).
    let xi1 = m.a1 * ehw / eh;
    let xi0 = m.a0 * ehw / eh;
    let num = gaussian_expectation(
        |x| {
            let e = expit(x);
            let hh = h.h(x);
            let d1 = m.a1 * x - xi1;
            let d0 = m.a0 * x - xi0;
            ((d1 * d1 + m.sigma1_2) / e + (d0 * d0 + m.sigma0_2) / (1.0 - e)) * hh * hh
        },
        &w,
        q,
    )?;
    Ok(num / eh2)
}

/// Empirical sandwich variance of the Hajek estimator from data.
///
/// With `use_fitted = false` the propensity scores are treated as known and
/// the estimator is b11 + b22 over a11^2. With `use_fitted = true` the
/// logistic-score correction terms enter via the M-estimation blocks.
pub fn hajek_sandwich_variance(
    data: &Dataset,
    h: TiltingFunction,
    use_fitted: bool,
) -> Result<f64> {
    let n = data.z.len();
    let scores: &[f64] = if use_fitted {
        data.fitted_scores
            .as_deref()
            .ok_or_else(|| Error::Estimation("fitted scores required but absent".into()))?
    } else {
        &data.true_scores
    };
    let p1 = data.n_covariates() + 1;
    if n < p1 + 2 {
        return Err(Error::Estimation(format!("need at least {} rows, have {n}", p1 + 2)));
    }

    // Hajek arm means as the xi plug-ins.
    let (mut s1w, mut s1wy, mut s0w, mut s0wy) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let (w1, w0) = h.arm_weights(scores[i]);
        if data.z[i] == 1 {
            s1w += w1;
            s1wy += w1 * data.y[i];
        } else {
            s0w += w0;
            s0wy += w0 * data.y[i];
        }
    }
    if s1w == 0.0 || s0w == 0.0 {
        return Err(Error::Estimation("an arm is empty or carries zero weight".into()));
    }
    let xi1 = s1wy / s1w;
    let xi0 = s0wy / s0w;

    let nf = n as f64;
    let (mut a11, mut b11, mut b22) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let e = scores[i];
        let (w1, w0) = h.arm_weights(e);
        a11 += h.h(crate::logit(e));
        if data.z[i] == 1 {
            let d = data.y[i] - xi1;
            b11 += d * d * w1 * w1;
        } else {
            let d = data.y[i] - xi0;
            b22 += d * d * w0 * w0;
        }
    }
    a11 /= nf;
    b11 /= nf;
    b22 /= nf;

    if !use_fitted {
        return Ok((b11 + b22) / (a11 * a11));
    }

    // Estimated-score correction with the logistic maximum-likelihood score
    // psi = x_tilde (Z - e), so a33 = E[e(1-e) x x^T].
    let mut a13 = DVector::zeros(p1);
    let mut a23 = DVector::zeros(p1);
    let mut b13 = DVector::zeros(p1);
    let mut b23 = DVector::zeros(p1);
    let mut a33 = DMatrix::zeros(p1, p1);
    let mut xi_row = DVector::zeros(p1);
    for i in 0..n {
        let e = scores[i];
        let v = e * (1.0 - e);
        xi_row[0] = 1.0;
        for j in 0..p1 - 1 {
            xi_row[j + 1] = data.covariate(i, j);
        }
        let (dw1, dw0) = h.arm_weight_derivs(e);
        let (w1, w0) = h.arm_weights(e);
        if data.z[i] == 1 {
            let d = data.y[i] - xi1;
            a13.axpy(-d * dw1 * v, &xi_row, 1.0);
            b13.axpy((1.0 - e) * w1 * d, &xi_row, 1.0);
        } else {
            let d = data.y[i] - xi0;
            a23.axpy(-d * dw0 * v, &xi_row, 1.0);
            b23.axpy(-e * w0 * d, &xi_row, 1.0);
        }
        a33.syger(v / nf, &xi_row, &xi_row, 1.0);
    }
    a13 /= nf;
    a23 /= nf;
    b13 /= nf;
    b23 /= nf;

    let chol = a33
        .clone()
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("information matrix e(1-e) X'X is singular".into()))?;
    let d = a13 - a23;
    let bd = b13 - b23;
    let inv_d = chol.solve(&d);
    let v = b11 + b22 - 2.0 * d.dot(&chol.solve(&bd)) + d.dot(&inv_d);
    Ok(v / (a11 * a11))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcome::{solve_outcome_model, OutcomeSummary};
    use crate::propensity::{law_from_spec, LogitNormalPropensity, OverlapSpec};

    fn qs() -> QuadratureSettings {
        QuadratureSettings::default()
    }

    fn law(r: f64, phi: f64) -> LogitNormalPropensity {
        law_from_spec(&OverlapSpec::new(r, phi).unwrap(), 1e-10, &qs()).unwrap()
    }

    fn std_model(ps: &LogitNormalPropensity, rho2: f64) -> OutcomeModel {
        let s = OutcomeSummary::pooled(0.0, 0.0, 1.0, rho2.sqrt()).unwrap();
        solve_outcome_model(&s, ps).unwrap()
    }

    #[test]
    fn degenerate_balanced_limit_is_four() {
        let ps = LogitNormalPropensity::degenerate(0.5);
        for rho2 in [0.0, 0.19, 0.5] {
            let v = ate_variance_std(&ps, rho2).unwrap();
            assert!((v.v_total - 4.0).abs() < 1e-12);
            assert_eq!(v.v_adj, 0.0);
        }
        // General r: 1/(r(1-r)).
        let ps = LogitNormalPropensity::degenerate(0.3);
        let v = ate_variance_std(&ps, 0.0).unwrap();
        assert!((v.v_total - 1.0 / (0.3 * 0.7)).abs() < 1e-10);
    }

    #[test]
    fn standardized_reference_values() {
        let ps = law(0.5, 0.81);
        let v0 = ate_variance_std(&ps, 0.0).unwrap();
        assert!((v0.v_total - 9.616_559_282_127_259).abs() < 1e-8);
        assert!((v0.v_total - v0.v_sh).abs() < 1e-12);
        let v19 = ate_variance_std(&ps, 0.19).unwrap();
        assert!((v19.v_total - 16.009_008_905_343_69).abs() < 1e-7);
        assert!((v19.v_sh - v0.v_sh).abs() < 1e-12);

        let rhc = law(0.381, 0.835);
        let v = ate_variance_std(&rhc, 0.0).unwrap();
        assert!((v.v_total - 9.512_753_698_378_46).abs() < 1e-8);
    }

    #[test]
    fn decomposition_and_monotonicity() {
        for phi in [0.6, 0.7, 0.81, 0.9, 0.99] {
            for r in [0.3, 0.5, 0.7] {
                // Skewed r raises the minimum attainable phi; skip those cells.
                let spec = OverlapSpec::new(r, phi).unwrap();
                let Ok(ps) = law_from_spec(&spec, 1e-10, &qs()) else {
                    continue;
                };
                let mut prev = 0.0;
                for (i, rho2) in [0.0, 0.05, 0.1, 0.2, 0.4, 0.8].iter().enumerate() {
                    let v = ate_variance_std(&ps, *rho2).unwrap();
                    assert!(v.v_adj >= 0.0, "v_adj < 0 at phi={phi} r={r}");
                    assert!(
                        (v.v_total - (v.v_sh + rho2 * v.v_adj)).abs() < 1e-9 * v.v_total.abs()
                    );
                    if i > 0 {
                        assert!(v.v_total >= prev, "not monotone in rho2");
                    }
                    prev = v.v_total;
                }
            }
        }
        // Monotone non-increasing in phi at fixed r, rho2 (phi above the
        // r = 0.5 attainable minimum 2/pi).
        for rho2 in [0.0, 0.19] {
            let mut prev = f64::INFINITY;
            for phi in [0.65, 0.7, 0.8, 0.9, 0.95, 0.999] {
                let v = ate_variance_std(&law(0.5, phi), rho2).unwrap().v_total;
                assert!(v <= prev + 1e-9, "variance increased in phi at {phi}");
                prev = v;
            }
        }
    }

    #[test]
    fn raw_equals_standardized_times_s2_when_pooled() {
        for (phi, rho2) in [(0.81f64, 0.19f64), (0.9, 0.0), (0.7, 0.35), (0.95, 0.05)] {
            let ps = law(0.5, phi);
            let s2 = 19.81;
            let s = OutcomeSummary::pooled(2.0, 1.0, s2, rho2.sqrt()).unwrap();
            let m = solve_outcome_model(&s, &ps).unwrap();
            let raw = ate_variance_raw(&m, &ps);
            let std = ate_variance_std(&ps, rho2).unwrap().v_total;
            assert!((raw / s2 - std).abs() < 1e-8 * std, "phi={phi} rho2={rho2}");
        }
    }

    #[test]
    fn raw_trivial_case() {
        let ps = LogitNormalPropensity::degenerate(0.5); // mu_e = 0, sigma_e2 = 0
        let m = solve_outcome_model(
            &OutcomeSummary::pooled(0.0, 0.0, 1.0, 0.0).unwrap(),
            &ps,
        )
        .unwrap();
        assert!((ate_variance_raw(&m, &ps) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_direct_integration() {
        // The closed form against direct numerical evaluation of the
        // defining variance integral E[(Y(1)-EY1)^2/e] + E[(Y(0)-EY0)^2/(1-e)].
        for (r, phi, rho2) in [(0.5, 0.81, 0.19), (0.381, 0.835, 0.0), (0.3, 0.9, 0.4)] {
            let ps = law(r, phi);
            let m = std_model(&ps, rho2);
            let w = ps.weight().unwrap();
            let direct = gaussian_expectation(
                |x| {
                    let d1 = m.a1 * (x - ps.mu_e);
                    let d0 = m.a0 * (x - ps.mu_e);
                    (d1 * d1 + m.sigma1_2) / expit(x) + (d0 * d0 + m.sigma0_2) / (1.0 - expit(x))
                },
                &w,
                &qs(),
            )
            .unwrap();
            let closed = ate_variance_std(&ps, rho2).unwrap().v_total;
            assert!(
                ((direct - closed) / closed).abs() < 1e-7,
                "r={r} phi={phi} rho2={rho2}: {direct} vs {closed}"
            );
        }
    }

    #[test]
    fn wate_reference_values() {
        let ps = law(0.381, 0.835);
        let m0 = std_model(&ps, 0.0);
        let cases = [
            (TiltingFunction::Ate, 0.0, 9.512_753_698_378_459),
            (TiltingFunction::Att, 0.0, 7.112_311_999_693_243),
            (TiltingFunction::Ato, 0.0, 5.048_833_981_275_225),
            (TiltingFunction::Att, 0.1, 7.994_370_631_657_453),
            (TiltingFunction::Ato, 0.1, 4.918_524_836_867_628),
        ];
        for (h, rho2, want) in cases {
            let m = if rho2 == 0.0 { m0 } else { std_model(&ps, rho2) };
            let got = wate_variance(h, &m, &ps, &qs()).unwrap();
            assert!(((got - want) / want).abs() < 1e-7, "{h:?} rho2={rho2}: {got}");
        }
    }

    #[test]
    fn wate_ate_reduces_to_raw() {
        for (r, phi, rho2) in [(0.5f64, 0.81f64, 0.19f64), (0.381, 0.835, 0.1), (0.7, 0.9, 0.0)] {
            let ps = law(r, phi);
            let s = OutcomeSummary::pooled(1.0, 0.0, 5.5, rho2.sqrt()).unwrap();
            let m = solve_outcome_model(&s, &ps).unwrap();
            let via_wate = wate_variance(TiltingFunction::Ate, &m, &ps, &qs()).unwrap();
            let raw = ate_variance_raw(&m, &ps);
            assert!((via_wate - raw).abs() < 1e-6 * raw, "r={r} phi={phi}");
        }
    }

    #[test]
    fn wate_degenerate_overlap_weights() {
        let ps = LogitNormalPropensity::degenerate(0.5);
        let m = std_model(&ps, 0.0);
        let v = wate_variance(TiltingFunction::Ato, &m, &ps, &qs()).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_rho2_rejected() {
        let ps = law(0.5, 0.81);
        assert!(ate_variance_std(&ps, -0.1).is_err());
        assert!(ate_variance_std(&ps, 1.0).is_err());
    }
}
