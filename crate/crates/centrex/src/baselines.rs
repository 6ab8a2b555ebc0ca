//! Comparison algorithms: Mean-Shift started from every data point,
//! K-means++ with restarts, and X-means (K-means++ swept over K, scored by
//! silhouette).

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    euclid_sq, mean_covariance, transform_to_eigenbasis, CovarianceModel, Dataset,
    DatasetCovariances,
};
use crate::kernels::Kernel;
use crate::meanshift::{iterate_in_basis, IterationConfig, StopReason};
use crate::metrics::silhouette;
use crate::pipeline::{
    assign_in_basis, fuse_with_log, ClusteringResult, PipelineDiagnostics, SearchRecord,
};
use crate::synth::rng_from_seed;

/// Tuning for the Mean-Shift baseline. Unlike the full pipeline there is no
/// pick seed (every point starts a search) and no marking test.
#[derive(Debug, Clone)]
pub struct MeanShiftConfig {
    pub epsilon_e: f64,
    /// Fusion threshold; the benchmark setting is 1.0.
    pub epsilon_f: f64,
    pub max_iters: usize,
}

impl Default for MeanShiftConfig {
    fn default() -> Self {
        MeanShiftConfig { epsilon_e: 1e-3, epsilon_f: 1.0, max_iters: 100 }
    }
}

impl MeanShiftConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.epsilon_e.is_finite() || self.epsilon_e <= 0.0 {
            return Err(Error::Config(format!("epsilon_e must be positive, got {}", self.epsilon_e)));
        }
        if !self.epsilon_f.is_finite() || self.epsilon_f <= 0.0 {
            return Err(Error::Config(format!("epsilon_f must be positive, got {}", self.epsilon_f)));
        }
        if self.max_iters < 2 {
            return Err(Error::Config(format!("max_iters must be at least 2, got {}", self.max_iters)));
        }
        Ok(())
    }
}

/// The covariances expressing a plain scalar bandwidth h: every point gets
/// h^2 I.
pub fn bandwidth_covariances(h: f64) -> Result<DatasetCovariances> {
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::Config(format!("bandwidth must be positive, got {h}")));
    }
    Ok(DatasetCovariances::Shared(CovarianceModel::ScaledIdentity(h * h)))
}

/// Mean-Shift: run the fixed-point search from every data point (no
/// first-step boost, no marking), fuse the candidate centroids, and assign.
/// Failed searches are recorded in the diagnostics and skipped.
pub fn meanshift_cluster(
    data: &Dataset,
    covs: &DatasetCovariances,
    kernel: &Kernel,
    cfg: &MeanShiftConfig,
) -> Result<ClusteringResult> {
    cfg.validate()?;
    covs.validate_for(data)?;
    let (zdata, zcovs, rotation) = transform_to_eigenbasis(data, covs)?;
    let qmean = mean_covariance(&zcovs)?;
    let iter_cfg = IterationConfig {
        epsilon_e: cfg.epsilon_e,
        max_iters: cfg.max_iters,
        use_init_heuristic: false,
    };
    let outcomes: Vec<_> = (0..zdata.len())
        .into_par_iter()
        .map(|n| {
            let init = zdata.point(n).to_vec();
            iterate_in_basis(&init, &zdata, &zcovs, kernel, &iter_cfg, None, &qmean)
        })
        .collect();
    let mut diag = PipelineDiagnostics::default();
    let mut candidates = Vec::new();
    for (n, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok((phi, trace)) => {
                diag.searches.push(SearchRecord {
                    seed_index: n,
                    map_applications: trace.iterates.len() - 1,
                    converged: trace.stop_reason == StopReason::Converged,
                    marked: 0,
                });
                candidates.push(phi);
            }
            Err(e) => diag.errors.push(format!("search from point {n}: {e}")),
        }
    }
    if candidates.is_empty() {
        return Err(Error::Numeric(format!(
            "no centroid survived estimation ({} searches failed)",
            diag.errors.len()
        )));
    }
    diag.pre_fusion_centroids = candidates.len();
    let (fused, merges) = fuse_with_log(&candidates, cfg.epsilon_f, zdata.dim())?;
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

/// D^2 seeding: first center uniform, each further center drawn with
/// probability proportional to the squared Euclidean distance to the nearest
/// chosen center.
fn d2_seed<R: Rng>(data: &Dataset, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.gen_range(0..n);
    centers.push(data.point(first).to_vec());
    let mut dist_sq: Vec<f64> = (0..n)
        .map(|i| euclid_sq(data.point(i), &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = dist_sq.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in dist_sq.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            // all points coincide with a center; fall back to uniform
            rng.gen_range(0..n)
        };
        centers.push(data.point(pick).to_vec());
        for i in 0..n {
            dist_sq[i] = dist_sq[i].min(euclid_sq(data.point(i), centers.last().unwrap()));
        }
    }
    centers
}

const LLOYD_MAX_ITERS: usize = 300;
const LLOYD_REL_TOL: f64 = 1e-8;

/// Lloyd iterations from the given centers until the within-cluster sum of
/// squares stabilizes. Returns centers, labels, final inertia, and the
/// inertia value after each assignment step.
pub(crate) fn lloyd(
    data: &Dataset,
    mut centers: Vec<Vec<f64>>,
) -> (Vec<Vec<f64>>, Vec<usize>, f64, Vec<f64>) {
    let n = data.len();
    let d = data.dim();
    let k = centers.len();
    let mut labels = vec![0usize; n];
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;
    for _ in 0..LLOYD_MAX_ITERS {
        // assignment step (ties to the lowest center index)
        let mut inertia = 0.0;
        for i in 0..n {
            let p = data.point(i);
            let mut best = 0usize;
            let mut best_sq = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let sq = euclid_sq(p, center);
                if sq < best_sq {
                    best_sq = sq;
                    best = c;
                }
            }
            labels[i] = best;
            inertia += best_sq;
        }
        trace.push(inertia);
        // empty clusters: reseed each to the point farthest from its own
        // center, then redo the assignment on the next sweep
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        if counts.iter().any(|&c| c == 0) {
            let mut taken = vec![false; n];
            for c in 0..k {
                if counts[c] > 0 {
                    continue;
                }
                let mut far = (0usize, -1.0);
                for i in 0..n {
                    if taken[i] || counts[labels[i]] <= 1 {
                        continue;
                    }
                    let sq = euclid_sq(data.point(i), &centers[labels[i]]);
                    if sq > far.1 {
                        far = (i, sq);
                    }
                }
                if far.1 > 0.0 {
                    taken[far.0] = true;
                    counts[labels[far.0]] -= 1;
                    counts[c] = 1; // provisional; fixed by the next assignment
                    centers[c] = data.point(far.0).to_vec();
                }
            }
            prev = f64::INFINITY; // force at least one more sweep
            continue;
        }
        // update step
        let mut sums = vec![vec![0.0_f64; d]; k];
        for i in 0..n {
            for (s, v) in sums[labels[i]].iter_mut().zip(data.point(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            for s in &mut sums[c] {
                *s /= counts[c] as f64;
            }
        }
        let moved = centers != sums;
        centers = sums;
        let converged = prev.is_finite()
            && prev - inertia <= LLOYD_REL_TOL * prev.abs().max(f64::MIN_POSITIVE);
        if converged || !moved {
            break;
        }
        prev = inertia;
    }
    // final inertia under the final centers
    let mut inertia = 0.0;
    for i in 0..n {
        let p = data.point(i);
        let mut best = 0usize;
        let mut best_sq = f64::INFINITY;
        for (c, center) in centers.iter().enumerate() {
            let sq = euclid_sq(p, center);
            if sq < best_sq {
                best_sq = sq;
                best = c;
            }
        }
        labels[i] = best;
        inertia += best_sq;
    }
    (centers, labels, inertia, trace)
}

fn compact_result(centers: Vec<Vec<f64>>, labels: Vec<usize>) -> ClusteringResult {
    let k = centers.len();
    let mut counts = vec![0usize; k];
    for &l in &labels {
        counts[l] += 1;
    }
    let mut remap = vec![usize::MAX; k];
    let mut survivors = Vec::new();
    for (c, center) in centers.into_iter().enumerate() {
        if counts[c] > 0 {
            remap[c] = survivors.len();
            survivors.push(center);
        }
    }
    let removed = k - survivors.len();
    let labels: Vec<usize> = labels.into_iter().map(|l| remap[l]).collect();
    let k_hat = survivors.len();
    ClusteringResult {
        centroids: survivors,
        labels,
        k_hat,
        diagnostics: PipelineDiagnostics { removed_empty: removed, ..Default::default() },
    }
}

/// K-means++ with `restarts` independent initializations, keeping the run
/// with the lowest inertia.
pub fn kmeanspp<R: Rng>(
    data: &Dataset,
    k: usize,
    restarts: usize,
    rng: &mut R,
) -> Result<ClusteringResult> {
    let n = data.len();
    if k < 1 || k > n {
        return Err(Error::Config(format!("K must satisfy 1 <= K <= N = {n}, got {k}")));
    }
    if restarts == 0 {
        return Err(Error::Config("restarts must be at least 1".into()));
    }
    let mut best: Option<(f64, Vec<Vec<f64>>, Vec<usize>)> = None;
    for _ in 0..restarts {
        let seeds = d2_seed(data, k, rng);
        let (centers, labels, inertia, _) = lloyd(data, seeds);
        if best.as_ref().map_or(true, |(bi, _, _)| inertia < *bi) {
            best = Some((inertia, centers, labels));
        }
    }
    let (_, centers, labels) = best.expect("at least one restart ran");
    Ok(compact_result(centers, labels))
}

/// X-means: K-means++ for every K in `k_range` (inclusive), scored by the
/// silhouette coefficient; K = 1 scores the sentinel -1 so it loses to any
/// valid split. Ties go to the smaller K.
pub fn xmeans<R: Rng>(
    data: &Dataset,
    k_range: (usize, usize),
    restarts: usize,
    rng: &mut R,
) -> Result<ClusteringResult> {
    let (k_lo, k_hi) = k_range;
    if k_lo < 1 || k_lo > k_hi {
        return Err(Error::Config(format!("K range [{k_lo}, {k_hi}] must be a nonempty range from 1")));
    }
    if k_hi > data.len() {
        return Err(Error::Config(format!(
            "K range upper end {k_hi} exceeds the number of points {}",
            data.len()
        )));
    }
    let mut best: Option<(f64, ClusteringResult)> = None;
    for k in k_lo..=k_hi {
        let result = kmeanspp(data, k, restarts, rng)?;
        let score = if k == 1 { -1.0 } else { silhouette(data, &result.labels)? };
        if best.as_ref().map_or(true, |(bs, _)| score > *bs) {
            best = Some((score, result));
        }
    }
    Ok(best.expect("K range is nonempty").1)
}

/// A baseline algorithm selection, as it appears in benchmark rosters.
#[derive(Debug, Clone)]
pub enum BaselineAlgorithm {
    /// Mean-Shift with the given kernel; `bandwidth` Some(h) overrides the
    /// provided covariances with h^2 I.
    MeanShift { kernel: Kernel, bandwidth: Option<f64>, config: MeanShiftConfig },
    KMeansPP { k: usize, restarts: usize },
    XMeans { k_range: (usize, usize), restarts: usize },
}

/// A baseline with its seed; `run` dispatches on the algorithm.
#[derive(Debug, Clone)]
pub struct BaselineSpec {
    pub algorithm: BaselineAlgorithm,
    pub seed: u64,
}

impl BaselineSpec {
    pub fn validate(&self) -> Result<()> {
        match &self.algorithm {
            BaselineAlgorithm::MeanShift { bandwidth, config, .. } => {
                config.validate()?;
                if let Some(h) = bandwidth {
                    bandwidth_covariances(*h)?;
                }
            }
            BaselineAlgorithm::KMeansPP { k, restarts } => {
                if *k < 1 {
                    return Err(Error::Config("K must be at least 1".into()));
                }
                if *restarts == 0 {
                    return Err(Error::Config("restarts must be at least 1".into()));
                }
            }
            BaselineAlgorithm::XMeans { k_range, restarts } => {
                if k_range.0 < 1 || k_range.0 > k_range.1 {
                    return Err(Error::Config(format!(
                        "K range [{}, {}] must be a nonempty range from 1",
                        k_range.0, k_range.1
                    )));
                }
                if *restarts == 0 {
                    return Err(Error::Config("restarts must be at least 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Run the baseline. `covs` is only consulted by Mean-Shift (and ignored
    /// there too when a scalar bandwidth is set).
    pub fn run(&self, data: &Dataset, covs: &DatasetCovariances) -> Result<ClusteringResult> {
        self.validate()?;
        match &self.algorithm {
            BaselineAlgorithm::MeanShift { kernel, bandwidth, config } => {
                let owned;
                let effective = match bandwidth {
                    Some(h) => {
                        owned = bandwidth_covariances(*h)?;
                        &owned
                    }
                    None => covs,
                };
                meanshift_cluster(data, effective, kernel, config)
            }
            BaselineAlgorithm::KMeansPP { k, restarts } => {
                let mut rng = rng_from_seed(self.seed);
                kmeanspp(data, *k, *restarts, &mut rng)
            }
            BaselineAlgorithm::XMeans { k_range, restarts } => {
                let mut rng = rng_from_seed(self.seed);
                xmeans(data, *k_range, *restarts, &mut rng)
            }
        }
    }
}
