//! Evaluation criteria: pairwise clustering error rate, silhouette
//! coefficient, and the correct-cluster-count indicator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{euclid_sq, Dataset};
use crate::pipeline::ClusteringResult;
use crate::synth::GroundTruth;

/// Bundle of the per-trial evaluation criteria.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub error_rate: f64,
    pub silhouette: f64,
    pub k_true: usize,
    pub k_hat: usize,
    pub correct_k: bool,
}

/// Pairwise clustering error: the normalized Hamming distance between the
/// co-membership indicators of the two partitions,
/// (2 / (N (N-1))) * sum_{i<j} |a_ij - a'_ij|. Invariant under relabeling.
pub fn error_rate(true_labels: &[usize], pred_labels: &[usize]) -> Result<f64> {
    let n = true_labels.len();
    if n != pred_labels.len() {
        return Err(Error::DimensionMismatch { expected: n, got: pred_labels.len() });
    }
    if n < 2 {
        return Err(Error::Domain("pairwise error rate needs at least two points".into()));
    }
    let mut disagreements = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let a = true_labels[i] == true_labels[j];
            let b = pred_labels[i] == pred_labels[j];
            if a != b {
                disagreements += 1;
            }
        }
    }
    Ok(disagreements as f64 / (n * (n - 1) / 2) as f64)
}

/// Mean silhouette coefficient with Euclidean distances.
///
/// Conventions: a point alone in its cluster scores 0; coincident points
/// (0/0) score 0; a labeling with fewer than two nonempty clusters returns
/// the sentinel -1.
pub fn silhouette(data: &Dataset, labels: &[usize]) -> Result<f64> {
    let n = data.len();
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    if n == 0 {
        return Err(Error::Empty("dataset"));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Ok(-1.0);
    }
    // Accumulate, for every point, its summed distance to each cluster.
    let mut sums = vec![vec![0.0_f64; k]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = euclid_sq(data.point(i), data.point(j)).sqrt();
            sums[i][labels[j]] += dist;
            sums[j][labels[i]] += dist;
        }
    }
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i];
        if counts[own] == 1 {
            continue; // singleton scores 0
        }
        let a = sums[i][own] / (counts[own] - 1) as f64;
        let mut b = f64::INFINITY;
        for c in 0..k {
            if c != own && counts[c] > 0 {
                b = b.min(sums[i][c] / counts[c] as f64);
            }
        }
        let denom = a.max(b);
        total += if denom == 0.0 { 0.0 } else { (b - a) / denom };
    }
    Ok(total / n as f64)
}

/// Evaluate a clustering result against the generator's ground truth.
pub fn evaluate(truth: &GroundTruth, result: &ClusteringResult, data: &Dataset) -> Result<EvalReport> {
    let err = error_rate(&truth.labels, &result.labels)?;
    let sil = silhouette(data, &result.labels)?;
    Ok(EvalReport {
        error_rate: err,
        silhouette: sil,
        k_true: truth.k(),
        k_hat: result.k_hat,
        correct_k: result.k_hat == truth.k(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CovarianceModel, DatasetCovariances};
    use crate::pipeline::PipelineDiagnostics;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn result_with(labels: Vec<usize>) -> ClusteringResult {
        let k_hat = labels.iter().max().map_or(0, |m| m + 1);
        ClusteringResult {
            centroids: vec![vec![0.0]; k_hat],
            labels,
            k_hat,
            diagnostics: PipelineDiagnostics::default(),
        }
    }

    #[test]
    fn identical_partitions_have_zero_error() {
        assert_eq!(error_rate(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn three_point_example() {
        // pairs: (0,1) same/diff, (0,2) diff/diff, (1,2) diff/same -> 2 of 3
        let e = error_rate(&[0, 0, 1], &[0, 1, 1]).unwrap();
        assert!((e - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn opposite_partitions_have_full_error() {
        let e = error_rate(&[0, 0, 0, 0], &[0, 1, 2, 3]).unwrap();
        assert_eq!(e, 1.0);
    }

    #[test]
    fn error_rate_input_checks() {
        assert!(error_rate(&[0, 1], &[0]).is_err());
        assert!(error_rate(&[0], &[0]).is_err());
    }

    #[test]
    fn error_rate_symmetric_and_permutation_invariant() {
        let mut rng = crate::synth::rng_from_seed(5);
        for _ in 0..50 {
            let n = rng.gen_range(2..30);
            let a: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let b: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let e1 = error_rate(&a, &b).unwrap();
            let e2 = error_rate(&b, &a).unwrap();
            assert_eq!(e1, e2);
            // relabel b by a random permutation of its ids
            let mut perm: Vec<usize> = (0..4).collect();
            perm.shuffle(&mut rng);
            let b2: Vec<usize> = b.iter().map(|&l| perm[l]).collect();
            assert_eq!(error_rate(&a, &b2).unwrap(), e1);
        }
    }

    #[test]
    fn error_rate_zero_iff_equal_partition() {
        let a = vec![0, 1, 0, 2];
        let b = vec![2, 0, 2, 1]; // same partition, relabeled
        assert_eq!(error_rate(&a, &b).unwrap(), 0.0);
        let c = vec![0, 1, 1, 2]; // genuinely different
        assert!(error_rate(&a, &c).unwrap() > 0.0);
    }

    #[test]
    fn silhouette_two_singletons() {
        let data = Dataset::new(vec![vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(silhouette(&data, &[0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn silhouette_tight_far_blobs() {
        // hand-checkable 8-point fixture: two clusters of diameter <= 0.2
        // separated by 100
        let mut pts = Vec::new();
        for i in 0..4 {
            pts.push(vec![0.1 * i as f64, 0.0]);
        }
        for i in 0..4 {
            pts.push(vec![100.0 + 0.1 * i as f64, 0.0]);
        }
        let data = Dataset::new(pts).unwrap();
        let labels = [0, 0, 0, 0, 1, 1, 1, 1];
        let s = silhouette(&data, &labels).unwrap();
        assert!(s >= 0.9, "expected near-perfect silhouette, got {s}");
        // independent oracle: direct two-loop formula
        let mut acc = 0.0;
        for i in 0..8 {
            let (mut asum, mut bsum) = (0.0, 0.0);
            for j in 0..8 {
                if i == j {
                    continue;
                }
                let dist = euclid_sq(data.point(i), data.point(j)).sqrt();
                if labels[i] == labels[j] {
                    asum += dist;
                } else {
                    bsum += dist;
                }
            }
            let a = asum / 3.0;
            let b = bsum / 4.0;
            acc += (b - a) / a.max(b);
        }
        assert!((s - acc / 8.0).abs() < 1e-12);
    }

    #[test]
    fn silhouette_coincident_points_guarded() {
        let data = Dataset::new(vec![vec![1.0, 1.0]; 4]).unwrap();
        let s = silhouette(&data, &[0, 0, 1, 1]).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn silhouette_single_cluster_sentinel() {
        let data = Dataset::new(vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(silhouette(&data, &[0, 0, 0]).unwrap(), -1.0);
    }

    #[test]
    fn silhouette_in_range_and_improves_on_fix() {
        let mut pts = Vec::new();
        for i in 0..5 {
            pts.push(vec![0.2 * i as f64]);
        }
        for i in 0..5 {
            pts.push(vec![50.0 + 0.2 * i as f64]);
        }
        let data = Dataset::new(pts).unwrap();
        let mislabeled = [0, 0, 0, 0, 1, 1, 1, 1, 1, 1]; // point 4 on the wrong side
        let fixed = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let s_bad = silhouette(&data, &mislabeled).unwrap();
        let s_good = silhouette(&data, &fixed).unwrap();
        assert!((-1.0..=1.0).contains(&s_bad));
        assert!((-1.0..=1.0).contains(&s_good));
        assert!(s_good > s_bad);
    }

    #[test]
    fn evaluate_bundles_criteria() {
        let data =
            Dataset::new(vec![vec![0.0], vec![0.1], vec![10.0], vec![10.1]]).unwrap();
        let truth = GroundTruth {
            centroids: vec![vec![0.05], vec![10.05]],
            labels: vec![0, 0, 1, 1],
            covariances: DatasetCovariances::Shared(CovarianceModel::ScaledIdentity(1.0)),
            intervals: None,
        };
        let perfect = evaluate(&truth, &result_with(vec![1, 1, 0, 0]), &data).unwrap();
        assert_eq!(perfect.error_rate, 0.0);
        assert!(perfect.correct_k);
        assert_eq!(perfect.k_true, 2);

        // one cluster split: K off by one, error small but nonzero
        let split = evaluate(&truth, &result_with(vec![0, 2, 1, 1]), &data).unwrap();
        assert!(!split.correct_k);
        assert_eq!(split.k_hat, 3);
        assert!((split.error_rate - 1.0 / 6.0).abs() < 1e-15);
    }
}
