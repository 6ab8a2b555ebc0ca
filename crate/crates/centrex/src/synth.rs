//! Synthetic benchmark generators and CSV loading.
//!
//! The generator draws K uniformly from a range, rejects centroid sets until
//! they are mutually separated, assigns points to clusters uniformly (redrawn
//! until every cluster is hit), then adds Gaussian noise according to one of
//! three noise models. Everything is a pure function of the seed.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CovarianceModel, CovarianceSpec, Dataset, DatasetCovariances};

/// Deterministic generator from a bare seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// The derived seed behind [`trial_rng`], exposed so benchmark rows can
/// record a value that reruns a single trial standalone.
pub fn trial_seed(base_seed: u64, grid_index: u64, trial_index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base_seed) ^ grid_index) ^ trial_index)
}

/// Independent stream for one (grid cell, trial) pair of a benchmark sweep.
/// Mixing the indices through splitmix64 keeps streams decorrelated while the
/// whole sweep stays a function of the base seed alone.
pub fn trial_rng(base_seed: u64, grid_index: u64, trial_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(base_seed, grid_index, trial_index))
}

/// Seed for one algorithm's private randomness within a trial, decorrelated
/// from the generator stream and from the other roster entries.
pub fn roster_seed(base_seed: u64, grid_index: u64, trial_index: u64, roster_index: u64) -> u64 {
    splitmix64(trial_seed(base_seed, grid_index, trial_index) ^ splitmix64(roster_index ^ 0x5EED_0F_A15E))
}

/// Noise model for one synthetic scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// All covariances sigma^2 I. sigma = 0 is tolerated (exact points) for
    /// degenerate test fixtures; the attached covariance is floored positive.
    FixedSigma(f64),
    /// Per-point diagonal covariances with standard deviations drawn
    /// uniformly and independently in [sigma_min, sigma_max].
    UniformDiagonal { sigma_min: f64, sigma_max: f64 },
    /// Per-cluster fair coin picks I0 = [sigma_min, sigma_min+1] or
    /// I1 = [sigma_max-1, sigma_max]; each point's standard deviations are
    /// then drawn uniformly in its cluster's interval.
    BimodalIntervals { sigma_min: f64, sigma_max: f64 },
}

/// Full description of one synthetic data scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct GenScenario {
    pub noise: NoiseModel,
    pub dim: usize,
    pub n: usize,
    /// Inclusive range for the number of clusters K.
    pub k_range: (usize, usize),
    /// Centroids are drawn i.i.d. from N(0, A^2 I).
    pub a: f64,
    /// Minimum pairwise centroid distance; centroid sets are redrawn until
    /// the minimum distance exceeds this.
    pub mu_min: f64,
}

impl GenScenario {
    /// Benchmark-grade defaults: d=100, N=400, K in [2,10], A=20, mu_min=200.
    pub fn new(noise: NoiseModel) -> Self {
        GenScenario { noise, dim: 100, n: 400, k_range: (2, 10), a: 20.0, mu_min: 200.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.dim == 0 || self.n == 0 {
            return bad("dimension and size must be positive".into());
        }
        if self.k_range.0 < 1 || self.k_range.0 > self.k_range.1 || self.k_range.1 > self.n {
            return bad(format!(
                "cluster count range [{}, {}] must sit inside [1, {}]",
                self.k_range.0, self.k_range.1, self.n
            ));
        }
        if !self.a.is_finite() || self.a <= 0.0 {
            return bad(format!("centroid scale must be positive, got {}", self.a));
        }
        if !self.mu_min.is_finite() || self.mu_min <= 0.0 {
            return bad(format!("separation must be positive, got {}", self.mu_min));
        }
        match &self.noise {
            NoiseModel::FixedSigma(s) => {
                if !s.is_finite() || *s < 0.0 {
                    return bad(format!("sigma must be >= 0, got {s}"));
                }
            }
            NoiseModel::UniformDiagonal { sigma_min, sigma_max }
            | NoiseModel::BimodalIntervals { sigma_min, sigma_max } => {
                if !sigma_min.is_finite() || !sigma_max.is_finite() || *sigma_min <= 0.0 {
                    return bad(format!("sigma bounds must be positive, got [{sigma_min}, {sigma_max}]"));
                }
                if sigma_min > sigma_max {
                    return bad(format!("sigma_min {sigma_min} exceeds sigma_max {sigma_max}"));
                }
                if let NoiseModel::BimodalIntervals { .. } = self.noise {
                    if *sigma_max < 1.0 {
                        return bad(format!("bimodal upper interval [{} - 1, {}] must stay positive", sigma_max, sigma_max));
                    }
                }
            }
        }
        Ok(())
    }
}

/// What the generator knows and the clustering algorithms must recover.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub covariances: DatasetCovariances,
    /// The per-point standard-deviation interval J_n, present for the
    /// bimodal scenario only; usable as side information by covariance
    /// policies even though the underlying coin flips are hidden.
    pub intervals: Option<Vec<(f64, f64)>>,
}

impl GroundTruth {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }
}

const MAX_REDRAWS: usize = 1_000_000;

/// Generate one dataset with its ground truth.
pub fn generate(scenario: &GenScenario, rng: &mut ChaCha8Rng) -> Result<(Dataset, GroundTruth)> {
    scenario.validate()?;
    let d = scenario.dim;
    let n = scenario.n;
    let k = rng.gen_range(scenario.k_range.0..=scenario.k_range.1);

    // Centroids: redraw the full set until the minimum pairwise distance
    // exceeds mu_min (full redraw avoids order bias).
    let mut centroids: Vec<Vec<f64>> = Vec::new();
    let mut accepted = false;
    for _ in 0..MAX_REDRAWS {
        centroids = (0..k)
            .map(|_| (0..d).map(|_| scenario.a * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let mut min_sq = f64::INFINITY;
        for i in 0..k {
            for j in (i + 1)..k {
                min_sq = min_sq.min(crate::geometry::euclid_sq(&centroids[i], &centroids[j]));
            }
        }
        if k < 2 || min_sq > scenario.mu_min * scenario.mu_min {
            accepted = true;
            break;
        }
    }
    if !accepted {
        return Err(Error::Infeasible(format!(
            "could not draw {k} centroids separated by more than {} within {MAX_REDRAWS} attempts",
            scenario.mu_min
        )));
    }

    // Labels: uniform over clusters, full redraw until surjective.
    let mut labels: Vec<usize> = Vec::new();
    let mut surjective = false;
    for _ in 0..MAX_REDRAWS {
        labels = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let mut seen = vec![false; k];
        labels.iter().for_each(|&l| seen[l] = true);
        if seen.iter().all(|&s| s) {
            surjective = true;
            break;
        }
    }
    if !surjective {
        return Err(Error::Infeasible(format!(
            "could not draw labels covering all {k} clusters within {MAX_REDRAWS} attempts"
        )));
    }

    // Covariances (and the per-point sigma draws for the diagonal models).
    let mut intervals: Option<Vec<(f64, f64)>> = None;
    let mut sigmas: Option<Vec<Vec<f64>>> = None;
    let covariances = match &scenario.noise {
        NoiseModel::FixedSigma(s) => DatasetCovariances::Shared(CovarianceModel::ScaledIdentity(
            (s * s).max(f64::MIN_POSITIVE),
        )),
        NoiseModel::UniformDiagonal { sigma_min, sigma_max } => {
            let sg: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.gen_range(*sigma_min..=*sigma_max)).collect())
                .collect();
            let models = sg
                .iter()
                .map(|row| CovarianceModel::diagonal(row.iter().map(|s| s * s).collect()))
                .collect::<Result<Vec<_>>>()?;
            sigmas = Some(sg);
            DatasetCovariances::per_point(models)?
        }
        NoiseModel::BimodalIntervals { sigma_min, sigma_max } => {
            let i0 = (*sigma_min, *sigma_min + 1.0);
            let i1 = (*sigma_max - 1.0, *sigma_max);
            let coin: Vec<bool> = (0..k).map(|_| rng.gen_bool(0.5)).collect();
            let per_point: Vec<(f64, f64)> =
                labels.iter().map(|&l| if coin[l] { i1 } else { i0 }).collect();
            let sg: Vec<Vec<f64>> = per_point
                .iter()
                .map(|(lo, hi)| (0..d).map(|_| rng.gen_range(*lo..=*hi)).collect())
                .collect();
            let models = sg
                .iter()
                .map(|row| CovarianceModel::diagonal(row.iter().map(|s| s * s).collect()))
                .collect::<Result<Vec<_>>>()?;
            sigmas = Some(sg);
            intervals = Some(per_point);
            DatasetCovariances::per_point(models)?
        }
    };

    // Points: centroid plus independent Gaussian noise per coordinate.
    let points: Vec<Vec<f64>> = (0..n)
        .map(|ni| {
            let c = &centroids[labels[ni]];
            (0..d)
                .map(|i| {
                    let s = match &scenario.noise {
                        NoiseModel::FixedSigma(s) => *s,
                        _ => sigmas.as_ref().unwrap()[ni][i],
                    };
                    c[i] + s * rng.sample::<f64, _>(StandardNormal)
                })
                .collect()
        })
        .collect();

    let data = Dataset::new(points)?;
    let truth = GroundTruth { centroids, labels, covariances, intervals };
    verify_truth(&data, &truth, scenario)?;
    Ok((data, truth))
}

fn verify_truth(data: &Dataset, truth: &GroundTruth, scenario: &GenScenario) -> Result<()> {
    let k = truth.k();
    let mut seen = vec![false; k];
    for &l in &truth.labels {
        if l >= k {
            return Err(Error::Numeric(format!("label {l} out of range for {k} clusters")));
        }
        seen[l] = true;
    }
    if !seen.iter().all(|&s| s) {
        return Err(Error::Numeric("generated labels are not surjective".into()));
    }
    for i in 0..k {
        for j in (i + 1)..k {
            let dist = crate::geometry::euclid_sq(&truth.centroids[i], &truth.centroids[j]).sqrt();
            if k >= 2 && dist <= scenario.mu_min {
                return Err(Error::Numeric(format!(
                    "centroids {i} and {j} are separated by {dist} <= {}",
                    scenario.mu_min
                )));
            }
        }
    }
    truth.covariances.validate_for(data)
}

/// Serializable ground-truth sidecar written next to generated CSV files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub covariance: CovarianceSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intervals: Option<Vec<(f64, f64)>>,
}

impl TruthSidecar {
    pub fn from_truth(truth: &GroundTruth) -> Result<Self> {
        Ok(TruthSidecar {
            centroids: truth.centroids.clone(),
            labels: truth.labels.clone(),
            covariance: CovarianceSpec::from_covariances(&truth.covariances)?,
            intervals: truth.intervals.clone(),
        })
    }

    pub fn into_truth(self) -> Result<GroundTruth> {
        let covariances = self.covariance.to_covariances(self.labels.len())?;
        Ok(GroundTruth {
            centroids: self.centroids,
            labels: self.labels,
            covariances,
            intervals: self.intervals,
        })
    }
}

/// A CSV file parsed into points plus whatever side columns it carried.
#[derive(Debug, Clone)]
pub struct CsvData {
    pub data: Dataset,
    pub labels: Option<Vec<usize>>,
    pub covariances: Option<DatasetCovariances>,
}

/// Load a CSV of points, one point per row.
///
/// A first line with any non-numeric field is treated as a header. A header
/// column named `label` (case-insensitive) is split off as integer labels;
/// all other columns are coordinates. The optional covariance spec is
/// instantiated against the row count and attached.
pub fn load_csv(path: &Path, covariance_spec: Option<&CovarianceSpec>) -> Result<CsvData> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut label_col: Option<usize> = None;
    let mut header_seen = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if rows.is_empty() && !header_seen && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            header_seen = true;
            label_col = fields.iter().position(|f| f.eq_ignore_ascii_case("label"));
            continue;
        }
        let mut coords = Vec::with_capacity(fields.len());
        for (col, field) in fields.iter().enumerate() {
            if Some(col) == label_col {
                let l: usize = field.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("label {field:?} is not a non-negative integer"),
                })?;
                labels.push(l);
            } else {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("cannot parse {field:?} as a number"),
                })?;
                coords.push(v);
            }
        }
        if let Some(first) = rows.first() {
            if coords.len() != first.len() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("row has {} coordinates, expected {}", coords.len(), first.len()),
                });
            }
        }
        rows.push(coords);
    }
    if rows.is_empty() {
        return Err(Error::Empty("CSV file"));
    }
    let data = Dataset::new(rows)?;
    let covariances = match covariance_spec {
        Some(spec) => Some(spec.to_covariances(data.len())?),
        None => None,
    };
    Ok(CsvData { data, labels: if label_col.is_some() { Some(labels) } else { None }, covariances })
}

/// Write points (and optional labels) as CSV with a header row. Floats use
/// the shortest round-trip representation, so output is byte-deterministic.
pub fn write_csv(data: &Dataset, labels: Option<&[usize]>, out: &mut impl Write) -> Result<()> {
    if let Some(ls) = labels {
        if ls.len() != data.len() {
            return Err(Error::DimensionMismatch { expected: data.len(), got: ls.len() });
        }
    }
    let mut header: Vec<String> = (0..data.dim()).map(|i| format!("x{i}")).collect();
    if labels.is_some() {
        header.push("label".to_string());
    }
    writeln!(out, "{}", header.join(","))?;
    for n in 0..data.len() {
        let mut fields: Vec<String> = data.point(n).iter().map(|v| format!("{v}")).collect();
        if let Some(ls) = labels {
            fields.push(format!("{}", ls[n]));
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp_path(name: &str) -> std::path::PathBuf {
        std::env::temp_dir().join(format!("centrex-synth-{}-{name}", std::process::id()))
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let scenario = GenScenario {
            noise: NoiseModel::UniformDiagonal { sigma_min: 1.0, sigma_max: 5.0 },
            dim: 4,
            n: 50,
            k_range: (2, 4),
            a: 20.0,
            mu_min: 10.0,
        };
        let (d1, t1) = generate(&scenario, &mut rng_from_seed(99)).unwrap();
        let (d2, t2) = generate(&scenario, &mut rng_from_seed(99)).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(t1.labels, t2.labels);
        assert_eq!(t1.centroids, t2.centroids);
        let s1 = serde_json::to_string(&TruthSidecar::from_truth(&t1).unwrap()).unwrap();
        let s2 = serde_json::to_string(&TruthSidecar::from_truth(&t2).unwrap()).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn zero_sigma_puts_points_on_centroids() {
        let scenario = GenScenario {
            noise: NoiseModel::FixedSigma(0.0),
            dim: 1,
            n: 20,
            k_range: (2, 2),
            a: 20.0,
            mu_min: 5.0,
        };
        let (data, truth) = generate(&scenario, &mut rng_from_seed(3)).unwrap();
        for n in 0..data.len() {
            assert_eq!(data.point(n), truth.centroids[truth.labels[n]].as_slice());
        }
    }

    #[test]
    fn cluster_means_concentrate() {
        let scenario = GenScenario::new(NoiseModel::FixedSigma(5.0));
        let (data, truth) = generate(&scenario, &mut rng_from_seed(12)).unwrap();
        let k = truth.k();
        let mut counts = vec![0usize; k];
        let mut sums = vec![vec![0.0; scenario.dim]; k];
        for n in 0..data.len() {
            counts[truth.labels[n]] += 1;
            for i in 0..scenario.dim {
                sums[truth.labels[n]][i] += data.point(n)[i];
            }
        }
        let mut total = 0usize;
        let mut inside = 0usize;
        for c in 0..k {
            let bound = 3.0 * 5.0 / (counts[c] as f64).sqrt();
            for i in 0..scenario.dim {
                let mean = sums[c][i] / counts[c] as f64;
                total += 1;
                if (mean - truth.centroids[c][i]).abs() <= bound {
                    inside += 1;
                }
            }
        }
        assert!(
            inside as f64 >= 0.99 * total as f64,
            "only {inside}/{total} coordinates within the 3-sigma bound"
        );
    }

    #[test]
    fn bimodal_sigmas_stay_in_their_intervals() {
        let (sigma_min, sigma_max) = (1.0, 5.0);
        let scenario = GenScenario {
            noise: NoiseModel::BimodalIntervals { sigma_min, sigma_max },
            dim: 6,
            n: 120,
            k_range: (2, 5),
            a: 20.0,
            mu_min: 20.0,
        };
        let (_, truth) = generate(&scenario, &mut rng_from_seed(21)).unwrap();
        let intervals = truth.intervals.as_ref().expect("bimodal scenario records intervals");
        // one interval per cluster, shared by all its members
        for (n, &l) in truth.labels.iter().enumerate() {
            let first = truth.labels.iter().position(|&m| m == l).unwrap();
            assert_eq!(intervals[n], intervals[first]);
        }
        for (n, (lo, hi)) in intervals.iter().enumerate() {
            assert!(
                (*lo, *hi) == (sigma_min, sigma_min + 1.0) || (*lo, *hi) == (sigma_max - 1.0, sigma_max)
            );
            match truth.covariances.model(n) {
                CovarianceModel::Diagonal(l2) => {
                    for v in l2 {
                        let s = v.sqrt();
                        assert!(s >= *lo - 1e-12 && s <= *hi + 1e-12, "sigma {s} outside [{lo}, {hi}]");
                    }
                }
                other => panic!("unexpected model {other:?}"),
            }
        }
    }

    #[test]
    fn single_cluster_sample_covariance_matches() {
        let scenario = GenScenario {
            noise: NoiseModel::FixedSigma(3.0),
            dim: 5,
            n: 10_000,
            k_range: (1, 1),
            a: 1.0,
            mu_min: 1.0,
        };
        let (data, truth) = generate(&scenario, &mut rng_from_seed(500)).unwrap();
        let c = &truth.centroids[0];
        for i in 0..5 {
            let var: f64 =
                data.points().iter().map(|p| (p[i] - c[i]) * (p[i] - c[i])).sum::<f64>() / 10_000.0;
            assert!((var - 9.0).abs() < 0.9, "coordinate {i}: sample variance {var}");
        }
    }

    #[test]
    fn infeasible_separation_reports_error() {
        let scenario = GenScenario {
            noise: NoiseModel::FixedSigma(1.0),
            dim: 2,
            n: 10,
            k_range: (3, 3),
            a: 1.0,
            mu_min: 1e6,
        };
        match generate(&scenario, &mut rng_from_seed(1)) {
            Err(Error::Infeasible(_)) => {}
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn validates_scenario_fields() {
        let mut s = GenScenario::new(NoiseModel::FixedSigma(1.0));
        s.k_range = (0, 3);
        assert!(s.validate().is_err());
        let mut s = GenScenario::new(NoiseModel::FixedSigma(1.0));
        s.k_range = (2, 500);
        assert!(s.validate().is_err());
        let s = GenScenario::new(NoiseModel::UniformDiagonal { sigma_min: 5.0, sigma_max: 1.0 });
        assert!(s.validate().is_err());
        let s = GenScenario::new(NoiseModel::FixedSigma(-1.0));
        assert!(s.validate().is_err());
    }

    #[test]
    fn csv_round_trip_with_labels() {
        let data = Dataset::new(vec![vec![1.5, -2.0], vec![0.25, 1e-12]]).unwrap();
        let labels = vec![0usize, 3];
        let mut buf: Vec<u8> = Vec::new();
        write_csv(&data, Some(&labels), &mut buf).unwrap();
        let path = tmp_path("roundtrip.csv");
        std::fs::write(&path, &buf).unwrap();
        let loaded = load_csv(&path, None).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(loaded.data, data);
        assert_eq!(loaded.labels.as_deref(), Some(labels.as_slice()));
    }

    #[test]
    fn csv_header_autodetect_and_headerless() {
        let path = tmp_path("headerless.csv");
        std::fs::write(&path, "1.0,2.0\n3.0,4.0\n").unwrap();
        let loaded = load_csv(&path, None).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(loaded.data.len(), 2);
        assert!(loaded.labels.is_none());

        let path = tmp_path("named.csv");
        std::fs::write(&path, "a,b\n1.0,2.0\n").unwrap();
        let loaded = load_csv(&path, None).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(loaded.data.len(), 1);
        assert_eq!(loaded.data.dim(), 2);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let path = tmp_path("bad.csv");
        std::fs::write(&path, "1.0,2.0\n3.0,oops\n").unwrap();
        let err = load_csv(&path, None).unwrap_err();
        std::fs::remove_file(&path).ok();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }

        let path = tmp_path("ragged.csv");
        std::fs::write(&path, "1.0,2.0\n3.0\n").unwrap();
        let err = load_csv(&path, None).unwrap_err();
        std::fs::remove_file(&path).ok();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_empty_file_is_an_error() {
        let path = tmp_path("empty.csv");
        std::fs::write(&path, "").unwrap();
        let err = load_csv(&path, None).unwrap_err();
        std::fs::remove_file(&path).ok();
        assert!(matches!(err, Error::Empty(_)));
    }

    #[test]
    fn csv_attaches_covariance_spec() {
        let path = tmp_path("withcov.csv");
        std::fs::write(&path, "1.0,2.0\n3.0,4.0\n").unwrap();
        let spec = CovarianceSpec::ScaledIdentity { sigma2: 4.0 };
        let loaded = load_csv(&path, Some(&spec)).unwrap();
        std::fs::remove_file(&path).ok();
        match loaded.covariances {
            Some(DatasetCovariances::Shared(CovarianceModel::ScaledIdentity(s2))) => {
                assert_eq!(s2, 4.0)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trial_streams_differ() {
        let mut a = trial_rng(7, 0, 0);
        let mut b = trial_rng(7, 0, 1);
        let mut c = trial_rng(7, 1, 0);
        let va: Vec<u64> = (0..4).map(|_| a.gen()).collect();
        let vb: Vec<u64> = (0..4).map(|_| b.gen()).collect();
        let vc: Vec<u64> = (0..4).map(|_| c.gen()).collect();
        assert_ne!(va, vb);
        assert_ne!(va, vc);
        assert_ne!(vb, vc);
        let mut a2 = trial_rng(7, 0, 0);
        let va2: Vec<u64> = (0..4).map(|_| a2.gen()).collect();
        assert_eq!(va, va2);
    }
}
