//! Maximum-likelihood estimation of a shared covariance scale.
//!
//! For data whose covariances are all sigma^2 C with known C and unknown
//! sigma, the scale is recovered from the minimum pairwise squared
//! Mahalanobis distance upsilon over a random subsample of P points: if M of
//! the P(P-1)/2 pairs are same-cluster pairs, that minimum behaves like the
//! minimum of M iid variables with cdf F_chi2_d(x / 2 sigma^2), giving the
//! likelihood
//!
//!   f(x, t) = (M / 2t^2) f_chi2_d(x / 2t^2) (1 - F_chi2_d(x / 2t^2))^{M-1}
//!
//! whose maximizer in t is the estimate. Maximization runs in log space
//! (golden-section on ln t) because the density underflows f64 across much
//! of the search range in high dimension.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{mahalanobis_sq, CovarianceModel, Dataset, DatasetCovariances};
use crate::specfun::{chi2_ln_pdf, chi2_ln_survival};
use crate::synth::rng_from_seed;

/// Configuration for the shared-scale estimator.
#[derive(Debug, Clone)]
pub struct MleConfig {
    /// Subsample size P (points drawn without replacement).
    pub p: usize,
    /// Assumed number M of same-cluster pairs among the P(P-1)/2 pairs.
    pub m: usize,
    /// Known covariance shape C; the estimate is sigma^2 C.
    pub base_cov: CovarianceModel,
    /// Search bounds (t_lo, t_hi) for sigma; `None` uses
    /// [1e-3, 1e3] * sqrt(upsilon / 2d), centered on the M = 1 closed form.
    pub bounds: Option<(f64, f64)>,
    /// Seed for the subsample draw.
    pub seed: u64,
}

impl MleConfig {
    /// Defaults: P = M = 50, adaptive bounds, seed 0.
    pub fn new(base_cov: CovarianceModel) -> Self {
        MleConfig { p: 50, m: 50, base_cov, bounds: None, seed: 0 }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.p < 2 || self.p > n {
            return Err(Error::Config(format!(
                "subsample size P must satisfy 2 <= P <= N = {n}, got {}",
                self.p
            )));
        }
        let max_pairs = self.p * (self.p - 1) / 2;
        if self.m < 1 || self.m > max_pairs {
            return Err(Error::Config(format!(
                "pair count M must satisfy 1 <= M <= P(P-1)/2 = {max_pairs}, got {}",
                self.m
            )));
        }
        if let Some((lo, hi)) = self.bounds {
            check_bounds(lo, hi)?;
        }
        Ok(())
    }
}

fn check_bounds(t_lo: f64, t_hi: f64) -> Result<()> {
    if !t_lo.is_finite() || !t_hi.is_finite() || t_lo <= 0.0 || t_lo >= t_hi {
        return Err(Error::Config(format!(
            "search bounds must satisfy 0 < t_lo < t_hi, got ({t_lo}, {t_hi})"
        )));
    }
    Ok(())
}

/// Minimum squared Mahalanobis distance (under `c`) over all pairs of a
/// uniform without-replacement subsample of `p` points.
pub fn min_pairwise_stat<R: Rng>(
    data: &Dataset,
    c: &CovarianceModel,
    p: usize,
    rng: &mut R,
) -> Result<f64> {
    let n = data.len();
    if p < 2 || p > n {
        return Err(Error::Config(format!("subsample size P must satisfy 2 <= P <= N = {n}, got {p}")));
    }
    c.validate(data.dim())?;
    let idx = rand::seq::index::sample(rng, n, p).into_vec();
    let mut best = f64::INFINITY;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let diff: Vec<f64> = data
                .point(i)
                .iter()
                .zip(data.point(j))
                .map(|(x, y)| x - y)
                .collect();
            best = best.min(mahalanobis_sq(&diff, c)?);
        }
    }
    Ok(best)
}

/// Log-likelihood ln f(upsilon, t) of the minimum-of-M-pairs model. Finite
/// wherever the argument u = upsilon / 2t^2 is (no underflow up to u ~ 1e6
/// and beyond; the survival factor is evaluated in log space).
pub fn ln_likelihood(upsilon: f64, d: usize, m: usize, t: f64) -> Result<f64> {
    if upsilon <= 0.0 || !upsilon.is_finite() {
        return Err(Error::Domain(format!("upsilon must be positive, got {upsilon}")));
    }
    if m < 1 {
        return Err(Error::Domain("pair count M must be at least 1".into()));
    }
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::Domain(format!("scale t must be positive, got {t}")));
    }
    let u = upsilon / (2.0 * t * t);
    if u == 0.0 || !u.is_finite() {
        return Err(Error::Numeric(format!(
            "likelihood argument upsilon/2t^2 left the floating-point range at t = {t}"
        )));
    }
    let ln_pdf = chi2_ln_pdf(d, u);
    let ln_surv = if m > 1 { (m as f64 - 1.0) * chi2_ln_survival(d, u)? } else { 0.0 };
    Ok((m as f64).ln() - (2.0 * t * t).ln() + ln_pdf + ln_surv)
}

const GOLDEN_RATIO: f64 = 0.618_033_988_749_894_9; // (sqrt(5) - 1) / 2
const COARSE_POINTS: usize = 65;
const LOG_TOL: f64 = 1e-8;

fn golden_argmax(
    mut lo: f64,
    mut hi: f64,
    eval: &dyn Fn(f64) -> Result<f64>,
) -> Result<f64> {
    let mut c = hi - GOLDEN_RATIO * (hi - lo);
    let mut d = lo + GOLDEN_RATIO * (hi - lo);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while hi - lo > LOG_TOL {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - GOLDEN_RATIO * (hi - lo);
            fc = eval(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + GOLDEN_RATIO * (hi - lo);
            fd = eval(d)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn mle_sigma_impl(upsilon: f64, d: usize, m: usize, t_lo: f64, t_hi: f64) -> Result<(f64, bool)> {
    if upsilon <= 0.0 || !upsilon.is_finite() {
        return Err(Error::Domain(format!("upsilon must be positive, got {upsilon}")));
    }
    check_bounds(t_lo, t_hi)?;
    let (s_lo, s_hi) = (t_lo.ln(), t_hi.ln());
    let eval = |s: f64| ln_likelihood(upsilon, d, m, s.exp());
    // Coarse scan to bracket the peak, then golden-section inside the
    // bracketing neighbors. The scan guards against picking a wrong slope
    // direction when the likelihood is flat near the boundaries.
    let step = (s_hi - s_lo) / (COARSE_POINTS - 1) as f64;
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..COARSE_POINTS {
        let v = eval(s_lo + step * i as f64)?;
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let bracket_lo = s_lo + step * best_i.saturating_sub(1) as f64;
    let bracket_hi = (s_lo + step * (best_i + 1) as f64).min(s_hi);
    let s_star = golden_argmax(bracket_lo, bracket_hi, &eval)?;
    let at_boundary = s_star - s_lo <= step || s_hi - s_star <= step;
    Ok((s_star.exp(), at_boundary))
}

/// Maximizer of the minimum-distance likelihood over t in [t_lo, t_hi],
/// accurate to about 1e-8 relative. Logs a warning when the maximizer sits
/// at a search boundary (the bounds then likely exclude the true optimum).
pub fn mle_sigma(upsilon: f64, d: usize, m: usize, t_lo: f64, t_hi: f64) -> Result<f64> {
    let (sigma, at_boundary) = mle_sigma_impl(upsilon, d, m, t_lo, t_hi)?;
    if at_boundary {
        log::warn!(
            "scale MLE maximizer {sigma:.6e} sits at the search boundary [{t_lo:.3e}, {t_hi:.3e}]; \
             the bounds likely exclude the true optimum"
        );
    }
    Ok(sigma)
}

/// Default search bounds [1e-3, 1e3] * sqrt(upsilon / 2d), centered on the
/// M = 1 closed-form maximizer.
pub fn default_bounds(upsilon: f64, d: usize) -> (f64, f64) {
    let center = (upsilon / (2.0 * d as f64)).sqrt();
    (1e-3 * center, 1e3 * center)
}

/// Everything the estimator observed, for reporting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MleReport {
    pub sigma_mle: f64,
    pub upsilon: f64,
    #[serde(rename = "P")]
    pub p: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub at_boundary: bool,
}

/// Draw the subsample, evaluate upsilon, and maximize the likelihood.
pub fn estimate_sigma_mle(data: &Dataset, cfg: &MleConfig) -> Result<MleReport> {
    cfg.validate(data.len())?;
    let mut rng = rng_from_seed(cfg.seed);
    let upsilon = min_pairwise_stat(data, &cfg.base_cov, cfg.p, &mut rng)?;
    if upsilon <= 0.0 {
        return Err(Error::Numeric(
            "minimum pairwise distance is zero (duplicated points in the subsample); \
             the scale likelihood is degenerate"
                .into(),
        ));
    }
    let (t_lo, t_hi) = cfg.bounds.unwrap_or_else(|| default_bounds(upsilon, data.dim()));
    let (sigma_mle, at_boundary) = mle_sigma_impl(upsilon, data.dim(), cfg.m, t_lo, t_hi)?;
    if at_boundary {
        log::warn!(
            "scale MLE maximizer {sigma_mle:.6e} sits at the search boundary [{t_lo:.3e}, {t_hi:.3e}]"
        );
    }
    Ok(MleReport { sigma_mle, upsilon, p: cfg.p, m: cfg.m, at_boundary })
}

/// Estimated covariances sigma_MLE^2 C, shared by every point.
pub fn estimate_covariances_mle(data: &Dataset, cfg: &MleConfig) -> Result<DatasetCovariances> {
    let report = estimate_sigma_mle(data, cfg)?;
    let scaled = cfg.base_cov.scale(report.sigma_mle * report.sigma_mle)?;
    Ok(DatasetCovariances::Shared(scaled))
}
