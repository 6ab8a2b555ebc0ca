//! The full clustering pipeline: seeded pick–estimate–mark centroid
//! estimation, centroid fusion, and Mahalanobis assignment with
//! empty-cluster removal.
//!
//! All geometry runs in the covariances' common eigenbasis: inputs are
//! rotated once on entry and centroids are rotated back on exit, so a run on
//! pre-rotated data with diagonal covariances produces bit-identical labels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    maha_sq_diag, mean_covariance, transform_to_eigenbasis, CovarianceModel, Dataset,
    DatasetCovariances,
};
use crate::kernels::Kernel;
use crate::meanshift::{iterate_in_basis, IterationConfig, StopReason};
use crate::specfun::chi2_quantile;
use crate::synth::rng_from_seed;
use rand::Rng;

/// Tuning parameters for the pipeline.
#[derive(Debug, Clone)]
pub struct CentrexConfig {
    /// Convergence threshold of the fixed-point iteration.
    pub epsilon_e: f64,
    /// Fusion threshold: centroids closer than epsilon_f * d merge.
    pub epsilon_f: f64,
    /// Size of the marking test; points within the (1 - alpha) quantile
    /// radius of a new centroid are marked off.
    pub alpha: f64,
    /// Hard cap on map applications per centroid search.
    pub max_iters: usize,
    pub kernel: Kernel,
    /// Seed for the uniform pick over unmarked points.
    pub seed: u64,
}

impl CentrexConfig {
    /// Defaults: epsilon_e = 1e-3, alpha = 1e-3, L = 100.
    pub fn new(kernel: Kernel, epsilon_f: f64) -> Self {
        CentrexConfig { epsilon_e: 1e-3, epsilon_f, alpha: 1e-3, max_iters: 100, kernel, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon_e.is_finite() || self.epsilon_e <= 0.0 {
            return Err(Error::Config(format!("epsilon_e must be positive, got {}", self.epsilon_e)));
        }
        if !self.epsilon_f.is_finite() || self.epsilon_f <= 0.0 {
            return Err(Error::Config(format!("epsilon_f must be positive, got {}", self.epsilon_f)));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 || self.alpha >= 1.0 {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.max_iters < 2 {
            return Err(Error::Config(format!("max_iters must be at least 2, got {}", self.max_iters)));
        }
        Ok(())
    }

    fn iteration(&self) -> IterationConfig {
        IterationConfig {
            epsilon_e: self.epsilon_e,
            max_iters: self.max_iters,
            use_init_heuristic: true,
        }
    }
}

/// The separation-based fusion threshold rule: epsilon_f = mu_min / (2 d).
pub fn separation_rule_epsilon_f(mu_min: f64, dim: usize) -> Result<f64> {
    if !mu_min.is_finite() || mu_min <= 0.0 || dim == 0 {
        return Err(Error::Config(format!("need mu_min > 0 and d >= 1, got {mu_min}, {dim}")));
    }
    Ok(mu_min / (2.0 * dim as f64))
}

/// Radius of the marking test: the square root of the chi-square (1 - alpha)
/// quantile, so that a true cluster member escapes marking with rate alpha.
pub fn marking_threshold(dim: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(chi2_quantile(dim, 1.0 - alpha)?.sqrt())
}

/// One centroid search in the estimation loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchRecord {
    /// Index of the data point the search started from.
    pub seed_index: usize,
    /// Number of map applications performed.
    pub map_applications: usize,
    pub converged: bool,
    /// How many points (including the seed) this search marked off.
    pub marked: usize,
}

/// One merge performed by the fusion loop, indices into the pre-merge list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FusionMerge {
    pub first: usize,
    pub second: usize,
    pub distance_over_dim: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PipelineDiagnostics {
    pub searches: Vec<SearchRecord>,
    pub pre_fusion_centroids: usize,
    pub fusion_merges: Vec<FusionMerge>,
    pub removed_empty: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub errors: Vec<String>,
}

/// Final clustering output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    #[serde(rename = "K_hat")]
    pub k_hat: usize,
    pub diagnostics: PipelineDiagnostics,
}

/// Centroid estimation (in the eigenbasis): repeatedly pick an unmarked
/// point, run the fixed-point search from it with the seed's covariance as
/// first-step boost, and mark off every unmarked point within the test
/// radius of the estimate.
fn estimate_in_basis(
    data: &Dataset,
    covs: &DatasetCovariances,
    cfg: &CentrexConfig,
    rng: &mut impl Rng,
    qmean: &CovarianceModel,
) -> Result<(Vec<Vec<f64>>, PipelineDiagnostics)> {
    let d = data.dim();
    let mu = marking_threshold(d, cfg.alpha)?;
    let mu_sq = mu * mu;
    let iter_cfg = cfg.iteration();
    let mut unmarked: Vec<usize> = (0..data.len()).collect();
    let mut centroids: Vec<Vec<f64>> = Vec::new();
    let mut diag = PipelineDiagnostics::default();
    let mut diff = vec![0.0; d];
    while !unmarked.is_empty() {
        let pick = rng.gen_range(0..unmarked.len());
        let n_star = unmarked[pick];
        let init = data.point(n_star).to_vec();
        let boost = covs.model(n_star).clone();
        match iterate_in_basis(&init, data, covs, &cfg.kernel, &iter_cfg, Some(&boost), qmean) {
            Ok((phi, trace)) => {
                let mut marked = 0usize;
                unmarked.retain(|&n| {
                    if n == n_star {
                        marked += 1;
                        return false;
                    }
                    let p = data.point(n);
                    for i in 0..d {
                        diff[i] = p[i] - phi[i];
                    }
                    let t = match covs.model(n) {
                        CovarianceModel::ScaledIdentity(s2) => {
                            diff.iter().map(|v| v * v).sum::<f64>() / s2
                        }
                        CovarianceModel::Diagonal(l) => maha_sq_diag(&diff, l),
                        CovarianceModel::SharedEigenbasis { .. } => {
                            unreachable!("estimation runs on diagonalized covariances")
                        }
                    };
                    if t <= mu_sq {
                        marked += 1;
                        false
                    } else {
                        true
                    }
                });
                diag.searches.push(SearchRecord {
                    seed_index: n_star,
                    map_applications: trace.iterates.len() - 1,
                    converged: trace.stop_reason == StopReason::Converged,
                    marked,
                });
                centroids.push(phi);
            }
            Err(e) => {
                diag.errors.push(format!("search from point {n_star}: {e}"));
                unmarked.retain(|&n| n != n_star);
            }
        }
    }
    Ok((centroids, diag))
}

/// Centroid estimation on raw inputs; rotates into the eigenbasis, runs the
/// loop, and rotates the estimates back.
pub fn estimate_centroids(
    data: &Dataset,
    covs: &DatasetCovariances,
    cfg: &CentrexConfig,
    rng: &mut impl Rng,
) -> Result<(Vec<Vec<f64>>, PipelineDiagnostics)> {
    cfg.validate()?;
    let (zdata, zcovs, rotation) = transform_to_eigenbasis(data, covs)?;
    let qmean = mean_covariance(&zcovs)?;
    let (centroids, diag) = estimate_in_basis(&zdata, &zcovs, cfg, rng, &qmean)?;
    let centroids = if rotation.is_identity() {
        centroids
    } else {
        centroids.iter().map(|c| rotation.apply(c)).collect()
    };
    Ok((centroids, diag))
}

/// Fusion: repeatedly merge the closest centroid pair into its midpoint
/// while the pair's distance divided by the dimension stays within
/// `epsilon_f`. Ties pick the lexicographically first index pair; the
/// midpoint is appended at the end of the list.
pub fn fuse(centroids: &[Vec<f64>], epsilon_f: f64, dim: usize) -> Result<Vec<Vec<f64>>> {
    Ok(fuse_with_log(centroids, epsilon_f, dim)?.0)
}

/// Fusion with a record of every merge (indices refer to the list as it was
/// just before that merge).
pub fn fuse_with_log(
    centroids: &[Vec<f64>],
    epsilon_f: f64,
    dim: usize,
) -> Result<(Vec<Vec<f64>>, Vec<FusionMerge>)> {
    if !epsilon_f.is_finite() || epsilon_f <= 0.0 {
        return Err(Error::Config(format!("epsilon_f must be positive, got {epsilon_f}")));
    }
    if dim == 0 {
        return Err(Error::Config("dimension must be positive".into()));
    }
    for c in centroids {
        if c.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: c.len() });
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("centroid has non-finite coordinates".into()));
        }
    }
    let mut set: Vec<Vec<f64>> = centroids.to_vec();
    let mut log = Vec::new();
    while set.len() >= 2 {
        let mut best = (0usize, 1usize);
        let mut best_sq = f64::INFINITY;
        for i in 0..set.len() {
            for j in (i + 1)..set.len() {
                let sq = crate::geometry::euclid_sq(&set[i], &set[j]);
                if sq < best_sq {
                    best_sq = sq;
                    best = (i, j);
                }
            }
        }
        let scaled = best_sq.sqrt() / dim as f64;
        if scaled > epsilon_f {
            break;
        }
        let (i, j) = best;
        let midpoint: Vec<f64> =
            set[i].iter().zip(&set[j]).map(|(a, b)| (a + b) / 2.0).collect();
        log.push(FusionMerge { first: i, second: j, distance_over_dim: scaled });
        set.remove(j);
        set.remove(i);
        set.push(midpoint);
    }
    Ok((set, log))
}

/// Assignment in the eigenbasis; returns labels, surviving centroids (still
/// in the eigenbasis), and how many empty centroids were removed.
pub(crate) fn assign_in_basis(
    data: &Dataset,
    covs: &DatasetCovariances,
    centroids: &[Vec<f64>],
) -> Result<(Vec<usize>, Vec<Vec<f64>>, usize)> {
    if centroids.is_empty() {
        return Err(Error::Empty("centroid set"));
    }
    let d = data.dim();
    let mut labels = vec![0usize; data.len()];
    let mut counts = vec![0usize; centroids.len()];
    let mut diff = vec![0.0; d];
    for n in 0..data.len() {
        let p = data.point(n);
        let mut best = 0usize;
        let mut best_sq = f64::INFINITY;
        for (k, c) in centroids.iter().enumerate() {
            for i in 0..d {
                diff[i] = p[i] - c[i];
            }
            let sq = match covs.model(n) {
                CovarianceModel::ScaledIdentity(s2) => diff.iter().map(|v| v * v).sum::<f64>() / s2,
                CovarianceModel::Diagonal(l) => maha_sq_diag(&diff, l),
                CovarianceModel::SharedEigenbasis { .. } => {
                    unreachable!("assignment runs on diagonalized covariances")
                }
            };
            if sq < best_sq {
                best_sq = sq;
                best = k;
            }
        }
        labels[n] = best;
        counts[best] += 1;
    }
    // Remove empty clusters, compacting labels while preserving order.
    let mut remap = vec![usize::MAX; centroids.len()];
    let mut survivors: Vec<Vec<f64>> = Vec::new();
    for (k, c) in centroids.iter().enumerate() {
        if counts[k] > 0 {
            remap[k] = survivors.len();
            survivors.push(c.clone());
        }
    }
    let removed = centroids.len() - survivors.len();
    for l in &mut labels {
        *l = remap[*l];
    }
    Ok((labels, survivors, removed))
}

/// Assign every point to its Mahalanobis-nearest centroid (ties to the
/// lowest index), then drop centroids that received no points.
pub fn assign(
    data: &Dataset,
    covs: &DatasetCovariances,
    centroids: &[Vec<f64>],
) -> Result<ClusteringResult> {
    covs.validate_for(data)?;
    let (zdata, zcovs, rotation) = transform_to_eigenbasis(data, covs)?;
    let zcentroids: Vec<Vec<f64>> = if rotation.is_identity() {
        centroids.to_vec()
    } else {
        centroids.iter().map(|c| rotation.apply_transpose(c)).collect()
    };
    for c in &zcentroids {
        if c.len() != data.dim() {
            return Err(Error::DimensionMismatch { expected: data.dim(), got: c.len() });
        }
    }
    let (labels, survivors, removed) = assign_in_basis(&zdata, &zcovs, &zcentroids)?;
    let centroids = if rotation.is_identity() {
        survivors
    } else {
        survivors.iter().map(|c| rotation.apply(c)).collect()
    };
    let k_hat = centroids.len();
    Ok(ClusteringResult {
        centroids,
        labels,
        k_hat,
        diagnostics: PipelineDiagnostics { removed_empty: removed, ..Default::default() },
    })
}

/// The full pipeline: estimate centroids, fuse, assign. Deterministic given
/// the config (including its seed).
pub fn centrex(
    data: &Dataset,
    covs: &DatasetCovariances,
    cfg: &CentrexConfig,
) -> Result<ClusteringResult> {
    cfg.validate()?;
    covs.validate_for(data)?;
    let (zdata, zcovs, rotation) = transform_to_eigenbasis(data, covs)?;
    let qmean = mean_covariance(&zcovs)?;
    let mut rng = rng_from_seed(cfg.seed);
    let (raw, mut diag) = estimate_in_basis(&zdata, &zcovs, cfg, &mut rng, &qmean)?;
    if raw.is_empty() {
        return Err(Error::Numeric(format!(
            "no centroid survived estimation ({} searches failed)",
            diag.errors.len()
        )));
    }
    diag.pre_fusion_centroids = raw.len();
    let (fused, merges) = fuse_with_log(&raw, cfg.epsilon_f, zdata.dim())?;
    diag.fusion_merges = merges;
    let (labels, survivors, removed) = assign_in_basis(&zdata, &zcovs, &fused)?;
    diag.removed_empty = removed;
    let centroids: Vec<Vec<f64>> = if rotation.is_identity() {
        survivors
    } else {
        survivors.iter().map(|c| rotation.apply(c)).collect()
    };
    let k_hat = centroids.len();
    Ok(ClusteringResult { centroids, labels, k_hat, diagnostics: diag })
}
