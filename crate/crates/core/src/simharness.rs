//! Monte Carlo validation harness: superpopulation generation, logistic
//! propensity fitting, Hajek estimation, summary extraction, the empirical
//! power loop, and a normality diagnostic.

use crate::error::{Error, Result};
use crate::expit;
use crate::normal;
use crate::propensity::overlap_from_scores;
use crate::variance::{hajek_sandwich_variance, TiltingFunction};
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Number of covariates in the synthetic superpopulation.
pub const N_COVARIATES: usize = 10;

/// Propensity coefficients (scaled by kappa) and outcome coefficients.
pub const BETA: [f64; N_COVARIATES] = [1.0, 1.0, -1.0, 0.0, -2.0, 1.0, 0.5, 0.0, 0.0, 0.0];
pub const GAMMA: [f64; N_COVARIATES] = [1.0, 1.0, -1.0, -1.0, 0.0, -1.0, -1.0, 0.0, 1.0, 1.0];

/// Calibrated propensity intercepts keeping the treatment proportion at 0.5
/// for the standard kappa grid.
pub const KAPPA_BETA0: [(f64, f64); 6] = [
    (0.0, 0.0),
    (0.25, -0.248),
    (0.5, -0.489),
    (0.75, -0.722),
    (0.9, -0.860),
    (1.0, -0.951),
];

/// Intercept for a kappa on the calibrated grid, if present.
pub fn beta0_for_kappa(kappa: f64) -> Option<f64> {
    KAPPA_BETA0
        .iter()
        .find(|(k, _)| (k - kappa).abs() < 1e-12)
        .map(|&(_, b0)| b0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    Continuous,
    Binary,
}

/// Settings for the superpopulation generator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_pop: usize,
    pub kappa: f64,
    pub beta0: f64,
    pub tau: f64,
    pub noise_sd: f64,
    pub outcome_kind: OutcomeKind,
    pub binary_threshold: f64,
    pub b_reps: usize,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn new(n_pop: usize, kappa: f64, beta0: f64, tau: f64, seed: u64) -> Result<Self> {
        let cfg = SimulationConfig {
            n_pop,
            kappa,
            beta0,
            tau,
            noise_sd: 4.0,
            outcome_kind: OutcomeKind::Continuous,
            binary_threshold: -2.0,
            b_reps: 1,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pop < 1000 {
            return Err(Error::domain(format!("n_pop must be >= 1000, got {}", self.n_pop)));
        }
        if self.b_reps < 1 {
            return Err(Error::domain("b_reps must be >= 1"));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::domain(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        if !(self.noise_sd > 0.0) {
            return Err(Error::domain("noise_sd must be > 0"));
        }
        Ok(())
    }
}

/// A generated (or loaded) study population.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Row-major n x N_COVARIATES.
    covariates: Vec<f64>,
    pub z: Vec<u8>,
    pub y: Vec<f64>,
    pub y1: Vec<f64>,
    pub y0: Vec<f64>,
    pub true_scores: Vec<f64>,
    pub fitted_scores: Option<Vec<f64>>,
    pub fitted_linear: Option<Vec<f64>>,
    pub separation_warning: bool,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        N_COVARIATES
    }

    pub fn covariate(&self, i: usize, j: usize) -> f64 {
        self.covariates[i * N_COVARIATES + j]
    }

    /// Maximum inverse-probability weight in use (diagnostic; no trimming).
    pub fn max_weight(&self, use_fitted: bool) -> Result<f64> {
        let scores = self.scores(use_fitted)?;
        let mut m: f64 = 0.0;
        for (i, &e) in scores.iter().enumerate() {
            let w = if self.z[i] == 1 { 1.0 / e } else { 1.0 / (1.0 - e) };
            m = m.max(w);
        }
        Ok(m)
    }

    pub fn scores(&self, use_fitted: bool) -> Result<&[f64]> {
        if use_fitted {
            self.fitted_scores
                .as_deref()
                .ok_or_else(|| Error::Estimation("fitted scores not available".into()))
        } else {
            Ok(&self.true_scores)
        }
    }

    /// Materializes the rows at `idx` as a new dataset (fits are dropped).
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut covariates = Vec::with_capacity(idx.len() * N_COVARIATES);
        let mut z = Vec::with_capacity(idx.len());
        let mut y = Vec::with_capacity(idx.len());
        let mut y1 = Vec::with_capacity(idx.len());
        let mut y0 = Vec::with_capacity(idx.len());
        let mut true_scores = Vec::with_capacity(idx.len());
        for &i in idx {
            covariates.extend_from_slice(&self.covariates[i * N_COVARIATES..(i + 1) * N_COVARIATES]);
            z.push(self.z[i]);
            y.push(self.y[i]);
            y1.push(self.y1[i]);
            y0.push(self.y0[i]);
            true_scores.push(self.true_scores[i]);
        }
        Dataset {
            covariates,
            z,
            y,
            y1,
            y0,
            true_scores,
            fitted_scores: None,
            fitted_linear: None,
            separation_warning: false,
        }
    }

    /// Writes the dataset as CSV with header
    /// `x1..x10,z,y,y1,y0,e_true[,e_hat,w_hat]`.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        let with_fit = self.fitted_scores.is_some();
        let mut header: Vec<String> = (1..=N_COVARIATES).map(|j| format!("x{j}")).collect();
        header.extend(["z", "y", "y1", "y0", "e_true"].map(String::from));
        if with_fit {
            header.extend(["e_hat", "w_hat"].map(String::from));
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = (0..N_COVARIATES)
                .map(|j| format!("{}", self.covariate(i, j)))
                .collect();
            rec.push(format!("{}", self.z[i]));
            for v in [self.y[i], self.y1[i], self.y0[i], self.true_scores[i]] {
                rec.push(format!("{v}"));
            }
            if with_fit {
                rec.push(format!("{}", self.fitted_scores.as_ref().unwrap()[i]));
                rec.push(format!("{}", self.fitted_linear.as_ref().unwrap()[i]));
            }
            w.write_record(&rec)?;
        }
        w.flush()
    }

    /// Reads a dataset written by [`Dataset::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Dataset> {
        let mut rdr = csv::Reader::from_path(path)
            .map_err(|e| Error::Estimation(format!("cannot open {}: {e}", path.display())))?;
        let headers = rdr
            .headers()
            .map_err(|e| Error::Estimation(format!("bad CSV header: {e}")))?
            .clone();
        let with_fit = headers.iter().any(|h| h == "e_hat");
        let mut ds = Dataset {
            covariates: Vec::new(),
            z: Vec::new(),
            y: Vec::new(),
            y1: Vec::new(),
            y0: Vec::new(),
            true_scores: Vec::new(),
            fitted_scores: with_fit.then(Vec::new),
            fitted_linear: with_fit.then(Vec::new),
            separation_warning: false,
        };
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Estimation(format!("bad CSV record: {e}")))?;
            let get = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::Estimation(format!("bad CSV field {k}")))
            };
            for j in 0..N_COVARIATES {
                ds.covariates.push(get(j)?);
            }
            ds.z.push(get(N_COVARIATES)? as u8);
            ds.y.push(get(N_COVARIATES + 1)?);
            ds.y1.push(get(N_COVARIATES + 2)?);
            ds.y0.push(get(N_COVARIATES + 3)?);
            ds.true_scores.push(get(N_COVARIATES + 4)?);
            if with_fit {
                ds.fitted_scores.as_mut().unwrap().push(get(N_COVARIATES + 5)?);
                ds.fitted_linear.as_mut().unwrap().push(get(N_COVARIATES + 6)?);
            }
        }
        Ok(ds)
    }
}

/// Draws the synthetic superpopulation. Deterministic given the seed.
pub fn generate(cfg: &SimulationConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_pop;

    let pois: Vec<Poisson<f64>> = [1.0, 2.0, 3.0]
        .iter()
        .map(|&l| Poisson::new(l).unwrap())
        .collect();
    let gamma = Gamma::new(2.0, 1.0 / 3.0).unwrap();
    let beta_dist = Beta::new(2.0, 3.0).unwrap();
    let bern_p = [0.2, 0.4, 0.6, 0.8];

    let mut covariates = Vec::with_capacity(n * N_COVARIATES);
    let mut z = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    let mut y0 = Vec::with_capacity(n);
    let mut true_scores = Vec::with_capacity(n);

    let mut x = [0.0f64; N_COVARIATES];
    for _ in 0..n {
        for (j, p) in bern_p.iter().enumerate() {
            x[j] = f64::from(rng.random::<f64>() < *p);
        }
        x[4] = rng.random::<f64>();
        for (j, d) in pois.iter().enumerate() {
            x[5 + j] = d.sample(&mut rng);
        }
        x[8] = gamma.sample(&mut rng);
        x[9] = beta_dist.sample(&mut rng);

        let xb: f64 = x.iter().zip(BETA.iter()).map(|(a, b)| a * b).sum();
        let xg: f64 = x.iter().zip(GAMMA.iter()).map(|(a, g)| a * g).sum();
        let e = expit(cfg.beta0 + cfg.kappa * xb);
        let zi = u8::from(rng.random::<f64>() < e);
        let eps0: f64 = cfg.noise_sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
        let eps1: f64 = cfg.noise_sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
        let (mut y1i, mut y0i) = (xg + cfg.tau + eps1, xg + eps0);
        if cfg.outcome_kind == OutcomeKind::Binary {
            y1i = f64::from(y1i > cfg.binary_threshold);
            y0i = f64::from(y0i > cfg.binary_threshold);
        }
        covariates.extend_from_slice(&x);
        true_scores.push(e);
        z.push(zi);
        y1.push(y1i);
        y0.push(y0i);
        y.push(if zi == 1 { y1i } else { y0i });
    }

    Ok(Dataset {
        covariates,
        z,
        y,
        y1,
        y0,
        true_scores,
        fitted_scores: None,
        fitted_linear: None,
        separation_warning: false,
    })
}

/// Solves the propensity intercept so that the treatment proportion equals
/// `r` on a pilot draw of the covariate linear predictor.
pub fn solve_beta0(kappa: f64, r: f64, pilot_n: usize, seed: u64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::domain(format!("r must be in (0,1), got {r}")));
    }
    let cfg = SimulationConfig::new(pilot_n.max(1000), kappa, 0.0, 0.0, seed)?;
    let pilot = generate(&cfg)?;
    let xb: Vec<f64> = (0..pilot.len())
        .map(|i| {
            kappa
                * (0..N_COVARIATES)
                    .map(|j| pilot.covariate(i, j) * BETA[j])
                    .sum::<f64>()
        })
        .collect();
    let mean_e = |b0: f64| xb.iter().map(|&v| expit(b0 + v)).sum::<f64>() / xb.len() as f64;
    let (mut lo, mut hi) = (-30.0, 30.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_e(mid) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Fits a logistic regression of Z on the covariates (with intercept) by
/// iteratively reweighted least squares and stores the fitted scores.
pub fn fit_logistic(data: &mut Dataset, tol: f64, max_iter: usize) -> Result<()> {
    let n = data.len();
    let p1 = N_COVARIATES + 1;
    if n < p1 + 1 {
        return Err(Error::Estimation(format!("need more than {p1} rows to fit, have {n}")));
    }
    let mut xmat = DMatrix::zeros(n, p1);
    for i in 0..n {
        xmat[(i, 0)] = 1.0;
        for j in 0..N_COVARIATES {
            xmat[(i, j + 1)] = data.covariate(i, j);
        }
    }
    let zvec = DVector::from_iterator(n, data.z.iter().map(|&v| f64::from(v)));
    let mut beta = DVector::zeros(p1);
    let mut grad_norm = f64::INFINITY;
    for _ in 0..max_iter {
        let eta = &xmat * &beta;
        let probs = eta.map(expit);
        let grad = xmat.transpose() * (&zvec - &probs);
        grad_norm = grad.amax() / n as f64;
        if grad_norm <= tol {
            let linear: Vec<f64> = eta.iter().copied().collect();
            let mut warned = false;
            let scores: Vec<f64> = probs
                .iter()
                .map(|&e| {
                    if e < 1e-12 || e > 1.0 - 1e-12 {
                        warned = true;
                        e.clamp(1e-12, 1.0 - 1e-12)
                    } else {
                        e
                    }
                })
                .collect();
            data.fitted_scores = Some(scores);
            data.fitted_linear = Some(linear);
            data.separation_warning = warned;
            return Ok(());
        }
        // Weighted normal equations X' W X delta = X'(z - p).
        let mut xw = xmat.clone();
        for i in 0..n {
            let w = (probs[i] * (1.0 - probs[i])).max(1e-10);
            for j in 0..p1 {
                xw[(i, j)] *= w;
            }
        }
        let hess = xmat.transpose() * xw;
        let chol = hess
            .cholesky()
            .ok_or_else(|| Error::RankDeficient("X'WX singular in logistic fit".into()))?;
        beta += chol.solve(&grad);
    }
    Err(Error::NoConvergence { iterations: max_iter, gradient_norm: grad_norm })
}

/// Hajek weighted-difference estimator for the chosen estimand.
pub fn hajek(data: &Dataset, h: TiltingFunction, use_fitted: bool) -> Result<f64> {
    let scores = data.scores(use_fitted)?;
    let (mut s1w, mut s1wy, mut s0w, mut s0wy) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..data.len() {
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
        return Err(Error::Estimation("empty treatment arm in Hajek estimate".into()));
    }
    Ok(s1wy / s1w - s0wy / s0w)
}

/// The summary statistics the analytic engine takes as input, measured on
/// a dataset with fitted scores.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SummaryExtract {
    pub r: f64,
    pub phi_hat: f64,
    pub e1: f64,
    pub e0: f64,
    pub s1_2: f64,
    pub s0_2: f64,
    pub rho1: f64,
    pub rho0: f64,
    pub s2_pooled: f64,
    pub rho2_pooled: f64,
    pub r2: f64,
}

fn arm_stats(w: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = y.len() as f64;
    if y.len() < 3 {
        return Err(Error::Estimation("arm too small for summary statistics".into()));
    }
    let my = y.iter().sum::<f64>() / n;
    let mw = w.iter().sum::<f64>() / n;
    let (mut vy, mut vw, mut c) = (0.0, 0.0, 0.0);
    for i in 0..y.len() {
        let dy = y[i] - my;
        let dw = w[i] - mw;
        vy += dy * dy;
        vw += dw * dw;
        c += dy * dw;
    }
    vy /= n - 1.0;
    vw /= n - 1.0;
    c /= n - 1.0;
    if vy <= 0.0 || vw <= 0.0 {
        return Err(Error::Estimation("degenerate variance in an arm".into()));
    }
    Ok((my, vy, c / (vy * vw).sqrt()))
}

/// Computes (r, phi_hat, arm summaries, pooled summaries, R^2).
pub fn extract_summaries(data: &Dataset) -> Result<SummaryExtract> {
    let scores = data
        .fitted_scores
        .as_deref()
        .ok_or_else(|| Error::Estimation("extract_summaries needs fitted scores".into()))?;
    let linear = data.fitted_linear.as_deref().unwrap();
    let n = data.len();
    let n1 = data.z.iter().filter(|&&z| z == 1).count();
    let r = n1 as f64 / n as f64;
    let phi_hat = overlap_from_scores(scores, r)?;

    let mut w1v = Vec::with_capacity(n1);
    let mut y1v = Vec::with_capacity(n1);
    let mut w0v = Vec::with_capacity(n - n1);
    let mut y0v = Vec::with_capacity(n - n1);
    for i in 0..n {
        if data.z[i] == 1 {
            w1v.push(linear[i]);
            y1v.push(data.y[i]);
        } else {
            w0v.push(linear[i]);
            y0v.push(data.y[i]);
        }
    }
    let (e1, s1_2, rho1) = arm_stats(&w1v, &y1v)?;
    let (e0, s0_2, rho0) = arm_stats(&w0v, &y0v)?;
    let s2_pooled = r * s1_2 + (1.0 - r) * s0_2;
    let rho2_pooled = r * rho1 * rho1 + (1.0 - r) * rho0 * rho0;

    // R^2 of arm-centered Y on the covariates, by least squares.
    let p1 = N_COVARIATES + 1;
    let mut xmat = DMatrix::zeros(n, p1);
    let mut yc = DVector::zeros(n);
    for i in 0..n {
        xmat[(i, 0)] = 1.0;
        for j in 0..N_COVARIATES {
            xmat[(i, j + 1)] = data.covariate(i, j);
        }
        yc[i] = data.y[i] - if data.z[i] == 1 { e1 } else { e0 };
    }
    let xtx = xmat.transpose() * &xmat;
    let xty = xmat.transpose() * &yc;
    let chol = xtx
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("X'X singular in R^2 regression".into()))?;
    let coef = chol.solve(&xty);
    let fitted = xmat * coef;
    let sst: f64 = yc.iter().map(|v| v * v).sum();
    let ssr: f64 = yc.iter().zip(fitted.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    let r2 = 1.0 - ssr / sst;

    Ok(SummaryExtract { r, phi_hat, e1, e0, s1_2, s0_2, rho1, rho0, s2_pooled, rho2_pooled, r2 })
}

/// How study samples are drawn from the superpopulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    WithoutReplacement,
    WithReplacement,
}

/// Variance plugged into the replicate-level test statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestVariance {
    /// A fixed design variance in outcome units (the analytic V).
    FixedDesign(f64),
    /// The per-replicate empirical sandwich estimate.
    Sandwich,
}

/// Settings for the empirical power loop.
#[derive(Debug, Clone, Copy)]
pub struct PowerSettings {
    pub n: usize,
    pub b_reps: usize,
    pub alpha: f64,
    pub h: TiltingFunction,
    pub use_fitted: bool,
    pub mode: SamplingMode,
    pub test: TestVariance,
    pub seed: u64,
}

/// Result of the power loop.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerEstimate {
    pub power: f64,
    pub mc_se: f64,
    pub rejected: usize,
    pub b_reps: usize,
    /// Replicates that failed estimation (counted as non-rejections).
    pub failures: usize,
}

fn run_replicate(pop: &Dataset, s: &PowerSettings, rep: u64, zq: f64) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    rng.set_stream(rep + 1);
    let idx: Vec<usize> = match s.mode {
        SamplingMode::WithoutReplacement => {
            index_sample(&mut rng, pop.len(), s.n).into_iter().collect()
        }
        SamplingMode::WithReplacement => {
            (0..s.n).map(|_| rng.random_range(0..pop.len())).collect()
        }
    };
    let mut sub = pop.subset(&idx);
    if s.use_fitted {
        fit_logistic(&mut sub, 1e-8, 60)?;
    }
    let tau_hat = hajek(&sub, s.h, s.use_fitted)?;
    let v = match s.test {
        TestVariance::FixedDesign(v) => v,
        TestVariance::Sandwich => hajek_sandwich_variance(&sub, s.h, s.use_fitted)?,
    };
    Ok(tau_hat.abs() > zq * (v / s.n as f64).sqrt())
}

/// Rejection fraction of the level-alpha two-sided test over replicated
/// subsamples. Deterministic given the seed, independent of thread count.
pub fn empirical_power(pop: &Dataset, s: &PowerSettings) -> Result<PowerEstimate> {
    if s.n < 2 || s.n > pop.len() {
        return Err(Error::domain(format!(
            "replicate size {} out of range for population {}",
            s.n,
            pop.len()
        )));
    }
    if !(s.alpha > 0.0 && s.alpha < 0.5) {
        return Err(Error::domain(format!("alpha must be in (0, 0.5), got {}", s.alpha)));
    }
    if let TestVariance::FixedDesign(v) = s.test {
        if !(v > 0.0) {
            return Err(Error::domain("design variance must be > 0"));
        }
    }
    let zq = normal::quantile(1.0 - s.alpha / 2.0);
    let pool = thread_pool()?;
    let outcomes: Vec<std::result::Result<bool, ()>> = pool.install(|| {
        (0..s.b_reps as u64)
            .into_par_iter()
            .map(|rep| run_replicate(pop, s, rep, zq).map_err(|_| ()))
            .collect()
    });
    let rejected = outcomes.iter().filter(|r| matches!(r, Ok(true))).count();
    let failures = outcomes.iter().filter(|r| r.is_err()).count();
    let p = rejected as f64 / s.b_reps as f64;
    Ok(PowerEstimate {
        power: p,
        mc_se: (p * (1.0 - p) / s.b_reps as f64).sqrt(),
        rejected,
        b_reps: s.b_reps,
        failures,
    })
}

/// Builds a rayon pool honoring the PSPOWER_THREADS cap.
fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("PSPOWER_THREADS") {
        let k: usize = v
            .parse()
            .map_err(|_| Error::domain(format!("PSPOWER_THREADS must be an integer, got {v:?}")))?;
        if k >= 1 {
            builder = builder.num_threads(k);
        }
    }
    builder
        .build()
        .map_err(|e| Error::Estimation(format!("cannot build thread pool: {e}")))
}

/// Correlation between the sorted sample and normal quantiles at plotting
/// positions (i - 0.375)/(n + 0.25). Near 1 indicates normality.
pub fn normality_diagnostic(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 30 {
        return Err(Error::domain(format!("need at least 30 values, got {n}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantiles: Vec<f64> = (0..n)
        .map(|i| normal::quantile((i as f64 + 1.0 - 0.375) / (n as f64 + 0.25)))
        .collect();
    let ms = sorted.iter().sum::<f64>() / n as f64;
    let mq = quantiles.iter().sum::<f64>() / n as f64;
    let (mut vs, mut vq, mut c) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let ds = sorted[i] - ms;
        let dq = quantiles[i] - mq;
        vs += ds * ds;
        vq += dq * dq;
        c += ds * dq;
    }
    if vs <= 0.0 {
        return Err(Error::Estimation("constant input has undefined correlation".into()));
    }
    Ok(c / (vs * vq).sqrt())
}
