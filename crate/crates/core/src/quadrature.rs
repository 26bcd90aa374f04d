//! Adaptive Simpson quadrature for Gaussian-weighted integrands on the real
//! line. Used for the conditional-moment integrals of the latent propensity
//! score and for all weighted-estimand variance integrals.

use crate::error::{Error, Result};
use crate::expit;

/// Gaussian weight N(mu, sigma2) under the integral sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianWeight {
    pub mu: f64,
    pub sigma2: f64,
}

impl GaussianWeight {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma2.is_finite() || sigma2 <= 0.0 {
            return Err(Error::domain(format!(
                "Gaussian weight needs finite mu and sigma2 > 0, got ({mu}, {sigma2})"
            )));
        }
        Ok(GaussianWeight { mu, sigma2 })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    fn density(&self, x: f64) -> f64 {
        let d = x - self.mu;
        (-0.5 * d * d / self.sigma2).exp() / (2.0 * std::f64::consts::PI * self.sigma2).sqrt()
    }
}

/// Tolerances and limits for the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Half-width of the integration window in units of sigma. The Gaussian
    /// tail mass beyond 8 sigma is below 1e-15, under every tolerance here.
    pub truncation_radius: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 1 << 20,
            truncation_radius: 8.0,
        }
    }
}

impl QuadratureSettings {
    fn validate(&self) -> Result<()> {
        let ok = self.abs_tol > 0.0
            && self.abs_tol < 1.0
            && self.rel_tol > 0.0
            && self.rel_tol < 1.0
            && self.max_subdivisions > 0
            && self.truncation_radius >= 8.0;
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid quadrature settings: {self:?}")))
        }
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

struct Adapt<'a> {
    f: &'a dyn Fn(f64) -> f64,
    budget: usize,
}

impl Adapt<'_> {
    // Classic adaptive Simpson with the Richardson correction delta/15.
    fn go(
        &mut self,
        a: f64,
        fa: f64,
        m: f64,
        fm: f64,
        b: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = (self.f)(lm);
        let frm = (self.f)(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol || depth >= 52 {
            return Ok(left + right + delta / 15.0);
        }
        if self.budget == 0 {
            return Err(Error::QuadratureConvergence {
                estimate: left + right,
                error_bound: delta.abs() / 15.0,
            });
        }
        self.budget -= 1;
        let half = 0.5 * tol;
        Ok(self.go(a, fa, lm, flm, m, fm, left, half, depth + 1)?
            + self.go(m, fm, rm, frm, b, fb, right, half, depth + 1)?)
    }
}

/// Adaptive Simpson integral of `f` over [a, b].
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, s: &QuadratureSettings) -> Result<f64> {
    s.validate()?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::domain(format!("bad integration interval [{a}, {b}]")));
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let rough = simpson(fa, fm, fb, b - a);
    let tol = s.abs_tol.max(s.rel_tol * rough.abs());
    let mut adapt = Adapt { f: &f, budget: s.max_subdivisions };
    adapt.go(a, fa, m, fm, b, fb, rough, tol, 0)
}

/// E[f(X)] for X ~ N(mu, sigma2), truncated at the configured radius.
pub fn gaussian_expectation(
    f: impl Fn(f64) -> f64,
    w: &GaussianWeight,
    s: &QuadratureSettings,
) -> Result<f64> {
    let r = s.truncation_radius * w.sigma();
    integrate(|x| f(x) * w.density(x), w.mu - r, w.mu + r, s)
}

/// Unnormalized arm-z tilted m-th moment of the latent score:
/// integral of x^m N(x; mu, sigma2) expit((-1)^{1-z} x) dx.
pub fn logistic_tilted_moment(
    m: u32,
    z: u8,
    w: &GaussianWeight,
    s: &QuadratureSettings,
) -> Result<f64> {
    if m > 2 {
        return Err(Error::domain(format!("tilted moment order must be 0..=2, got {m}")));
    }
    if z > 1 {
        return Err(Error::domain(format!("arm must be 0 or 1, got {z}")));
    }
    let sign = if z == 1 { 1.0 } else { -1.0 };
    gaussian_expectation(|x| x.powi(m as i32) * expit(sign * x), w, s)
}
