//! The generalized mean-shift map, its fixed-point iteration, and the cost
//! function whose descent it follows.
//!
//! For diagonal (or scaled-identity) covariances the map is a per-coordinate
//! weighted precision mean, so no matrices are ever assembled. Covariances
//! with a common eigenbasis are handled by rotating into that basis once; the
//! map commutes with the rotation.

use crate::error::{Error, Result};
use crate::geometry::{
    mahalanobis_sq, maha_sq_diag, mean_covariance, transform_to_eigenbasis, CovarianceModel,
    Dataset, DatasetCovariances,
};
use crate::kernels::Kernel;

/// Why a fixed-point search stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIters,
}

/// Record of one fixed-point search.
#[derive(Debug, Clone)]
pub struct FixedPointTrace {
    /// phi^(1) (the initializer) through the last iterate; at most L+1 long.
    pub iterates: Vec<Vec<f64>>,
    /// Cost of each iterate as a single-probe restriction of the full cost:
    /// sum_n R(nu^2_{Sigma'_n}(y_n - phi)).
    pub cost_values: Vec<f64>,
    pub stop_reason: StopReason,
}

/// Tuning knobs for the fixed-point iteration.
#[derive(Debug, Clone)]
pub struct IterationConfig {
    /// Convergence threshold: stop when nu_Q(step) / d <= epsilon_e.
    pub epsilon_e: f64,
    /// Hard cap L on map applications.
    pub max_iters: usize,
    /// Inflate every covariance by the initializer's own covariance on the
    /// first map application.
    pub use_init_heuristic: bool,
}

impl Default for IterationConfig {
    fn default() -> Self {
        IterationConfig { epsilon_e: 1e-3, max_iters: 100, use_init_heuristic: true }
    }
}

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.epsilon_e.is_finite() || self.epsilon_e <= 0.0 {
            return Err(Error::Config(format!("epsilon_e must be positive, got {}", self.epsilon_e)));
        }
        if self.max_iters < 2 {
            return Err(Error::Config(format!("max_iters must be at least 2, got {}", self.max_iters)));
        }
        Ok(())
    }
}

fn maha_sq_model(x: &[f64], model: &CovarianceModel) -> f64 {
    match model {
        CovarianceModel::ScaledIdentity(s2) => x.iter().map(|v| v * v).sum::<f64>() / s2,
        CovarianceModel::Diagonal(l) => maha_sq_diag(x, l),
        CovarianceModel::SharedEigenbasis { .. } => {
            unreachable!("eigenbasis models are diagonalized before the map runs")
        }
    }
}

/// One application of the map to `phi`, with `data`/`covs` already expressed
/// in the eigenbasis (diagonal-family models only). `fallback_cov` is the
/// mean covariance used to pick a rescue point if every weight underflows.
pub(crate) fn map_in_basis(
    phi: &[f64],
    data: &Dataset,
    covs: &DatasetCovariances,
    kernel: &Kernel,
    fallback_cov: &CovarianceModel,
) -> Result<Vec<f64>> {
    let d = data.dim();
    let n = data.len();
    debug_assert_eq!(phi.len(), d);

    let mut diff = vec![0.0; d];
    let mut weights = vec![0.0; n];
    let mut wmax = 0.0_f64;
    for idx in 0..n {
        let p = data.point(idx);
        for i in 0..d {
            diff[i] = p[i] - phi[i];
        }
        let t = maha_sq_model(&diff, covs.model(idx));
        let w = kernel.eval(t)?;
        weights[idx] = w;
        wmax = wmax.max(w);
    }
    if !(wmax > 0.0) || !wmax.is_finite() {
        return rescue_point(phi, data, fallback_cov);
    }

    // Normalizing by the largest weight makes the accumulation scale-free:
    // the winning point contributes 1.0, so the denominator cannot underflow.
    let mut num = vec![0.0; d];
    let mut den = vec![0.0; d];
    for idx in 0..n {
        let u = weights[idx] / wmax;
        if u == 0.0 {
            continue;
        }
        let p = data.point(idx);
        match covs.model(idx) {
            CovarianceModel::ScaledIdentity(s2) => {
                let a = u / s2;
                for i in 0..d {
                    num[i] += a * p[i];
                    den[i] += a;
                }
            }
            CovarianceModel::Diagonal(l) => {
                for i in 0..d {
                    let a = u / l[i];
                    num[i] += a * p[i];
                    den[i] += a;
                }
            }
            CovarianceModel::SharedEigenbasis { .. } => {
                unreachable!("eigenbasis models are diagonalized before the map runs")
            }
        }
    }
    if den.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return rescue_point(phi, data, fallback_cov);
    }
    Ok((0..d).map(|i| num[i] / den[i]).collect())
}

/// Underflow rescue: the data point nearest to `phi` in the mean-covariance
/// Mahalanobis distance (lowest index on ties).
fn rescue_point(phi: &[f64], data: &Dataset, fallback_cov: &CovarianceModel) -> Result<Vec<f64>> {
    let d = data.dim();
    let mut best = 0usize;
    let mut best_dist = f64::INFINITY;
    let mut diff = vec![0.0; d];
    for idx in 0..data.len() {
        let p = data.point(idx);
        for i in 0..d {
            diff[i] = p[i] - phi[i];
        }
        let t = maha_sq_model(&diff, fallback_cov);
        if t < best_dist {
            best_dist = t;
            best = idx;
        }
    }
    if !best_dist.is_finite() {
        return Err(Error::Numeric("cannot pick a rescue point: all distances overflow".into()));
    }
    Ok(data.point(best).to_vec())
}

fn validate_map_inputs(phi: &[f64], data: &Dataset, covs: &DatasetCovariances) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if phi.len() != data.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), got: phi.len() });
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("probe point has non-finite coordinates".into()));
    }
    covs.validate_for(data)
}

/// One application of the generalized mean-shift map:
/// (sum_n w_n Sigma'_n^{-1})^{-1} sum_n w_n Sigma'_n^{-1} y_n with
/// w_n = w(nu^2_{Sigma'_n}(y_n - phi)).
pub fn mean_shift_map(
    phi: &[f64],
    data: &Dataset,
    covs: &DatasetCovariances,
    kernel: &Kernel,
) -> Result<Vec<f64>> {
    validate_map_inputs(phi, data, covs)?;
    let (zdata, zcovs, rotation) = transform_to_eigenbasis(data, covs)?;
    let fallback = mean_covariance(&zcovs)?;
    let xi = rotation.apply_transpose(phi);
    let out = map_in_basis(&xi, &zdata, &zcovs, kernel, &fallback)?;
    Ok(if rotation.is_identity() { out } else { rotation.apply(&out) })
}

/// The classic special case: all covariances h^2 I, weights
/// w(|y_n - phi|^2 / h^2), output the weighted mean.
pub fn mean_shift_map_classic(
    phi: &[f64],
    data: &Dataset,
    h: f64,
    kernel: &Kernel,
) -> Result<Vec<f64>> {
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::Domain(format!("bandwidth must be positive, got {h}")));
    }
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if phi.len() != data.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), got: phi.len() });
    }
    let covs = DatasetCovariances::Shared(CovarianceModel::ScaledIdentity(h * h));
    let fallback = CovarianceModel::ScaledIdentity(h * h);
    map_in_basis(phi, data, &covs, kernel, &fallback)
}

/// Iterate the map from `init` until the scaled mean-covariance Mahalanobis
/// step size drops to `epsilon_e` or `max_iters` applications have run.
/// With `use_init_heuristic`, the first application inflates every
/// covariance by `init_cov_boost` (the initializer's own covariance).
pub fn iterate_to_fixed_point(
    init: &[f64],
    data: &Dataset,
    covs: &DatasetCovariances,
    kernel: &Kernel,
    cfg: &IterationConfig,
    init_cov_boost: Option<&CovarianceModel>,
) -> Result<(Vec<f64>, FixedPointTrace)> {
    cfg.validate()?;
    validate_map_inputs(init, data, covs)?;
    let (zdata, zcovs, rotation) = transform_to_eigenbasis(data, covs)?;
    let qmean = mean_covariance(&zcovs)?;
    let boost = match init_cov_boost {
        Some(b) => {
            // express the boost in the same (eigen)basis as the data
            let b = match b {
                CovarianceModel::SharedEigenbasis { rotation: br, delta } => {
                    if br.as_ref() != &rotation {
                        return Err(Error::Domain(
                            "initializer covariance uses a different eigenbasis than the data".into(),
                        ));
                    }
                    CovarianceModel::Diagonal(delta.clone())
                }
                other => other.clone(),
            };
            b.validate(zdata.dim())?;
            Some(b)
        }
        None => None,
    };
    let xi = rotation.apply_transpose(init);
    let (point, mut trace) =
        iterate_in_basis(&xi, &zdata, &zcovs, kernel, cfg, boost.as_ref(), &qmean)?;
    if rotation.is_identity() {
        return Ok((point, trace));
    }
    trace.iterates = trace.iterates.iter().map(|p| rotation.apply(p)).collect();
    Ok((rotation.apply(&point), trace))
}

/// The iteration proper, with everything already in the eigenbasis.
pub(crate) fn iterate_in_basis(
    init: &[f64],
    data: &Dataset,
    covs: &DatasetCovariances,
    kernel: &Kernel,
    cfg: &IterationConfig,
    init_cov_boost: Option<&CovarianceModel>,
    qmean: &CovarianceModel,
) -> Result<(Vec<f64>, FixedPointTrace)> {
    let d = data.dim() as f64;
    let boosted: Option<DatasetCovariances> = match (cfg.use_init_heuristic, init_cov_boost) {
        (true, Some(b)) => Some(add_to_all(covs, b)?),
        _ => None,
    };

    let mut iterates: Vec<Vec<f64>> = vec![init.to_vec()];
    let mut cost_values: Vec<f64> = vec![probe_cost_in_basis(init, data, covs, kernel)?];
    let mut stop_reason = StopReason::MaxIters;
    let mut phi = init.to_vec();
    for ell in 1..=cfg.max_iters {
        let step_covs = match (&boosted, ell) {
            (Some(b), 1) => b,
            _ => covs,
        };
        let next = map_in_basis(&phi, data, step_covs, kernel, qmean)?;
        iterates.push(next.clone());
        cost_values.push(probe_cost_in_basis(&next, data, covs, kernel)?);
        let diff: Vec<f64> = next.iter().zip(&phi).map(|(a, b)| a - b).collect();
        let step = maha_sq_model(&diff, qmean).sqrt() / d;
        phi = next;
        if step <= cfg.epsilon_e {
            stop_reason = StopReason::Converged;
            break;
        }
    }
    Ok((phi.clone(), FixedPointTrace { iterates, cost_values, stop_reason }))
}

fn add_to_all(covs: &DatasetCovariances, boost: &CovarianceModel) -> Result<DatasetCovariances> {
    Ok(match covs {
        DatasetCovariances::Shared(m) => DatasetCovariances::Shared(m.add(boost)?),
        DatasetCovariances::PerPoint(ms) => {
            DatasetCovariances::PerPoint(ms.iter().map(|m| m.add(boost)).collect::<Result<_>>()?)
        }
    })
}

fn probe_cost_in_basis(
    phi: &[f64],
    data: &Dataset,
    covs: &DatasetCovariances,
    kernel: &Kernel,
) -> Result<f64> {
    let d = data.dim();
    let mut diff = vec![0.0; d];
    let mut acc = 0.0;
    for idx in 0..data.len() {
        let p = data.point(idx);
        for i in 0..d {
            diff[i] = p[i] - phi[i];
        }
        acc += kernel.antiderivative(maha_sq_model(&diff, covs.model(idx)))?;
    }
    Ok(acc)
}

/// The cost J(Theta) = sum_k sum_n R(nu^2_{Sigma'_n}(y_n - Theta(k))), where
/// R is the kernel's antiderivative.
pub fn cost_j(
    theta: &[Vec<f64>],
    data: &Dataset,
    covs: &DatasetCovariances,
    kernel: &Kernel,
) -> Result<f64> {
    if theta.is_empty() {
        return Err(Error::Empty("centroid list"));
    }
    covs.validate_for(data)?;
    let mut acc = 0.0;
    for probe in theta {
        if probe.len() != data.dim() {
            return Err(Error::DimensionMismatch { expected: data.dim(), got: probe.len() });
        }
        for idx in 0..data.len() {
            let diff: Vec<f64> =
                data.point(idx).iter().zip(probe).map(|(a, b)| a - b).collect();
            acc += kernel.antiderivative(mahalanobis_sq(&diff, covs.model(idx))?)?;
        }
    }
    Ok(acc)
}
