//! Seeded benchmark sweeps: a grid of noise levels x trials x algorithm
//! roster, evaluated against generator truth and emitted as plot-ready CSV.
//!
//! Determinism contract: every trial owns an RNG stream derived from (base
//! seed, grid index, trial index), and every roster entry gets a further
//! decorrelated stream, so results are independent of scheduling and of the
//! worker count. Rows appear in grid-major, then trial, then roster order.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{kmeanspp, meanshift_cluster, xmeans, MeanShiftConfig};
use crate::error::{Error, Result};
use crate::geometry::{CovarianceModel, Dataset, DatasetCovariances};
use crate::kernels::Kernel;
use crate::metrics::evaluate;
use crate::mle::{estimate_covariances_mle, MleConfig};
use crate::pipeline::{centrex, separation_rule_epsilon_f, CentrexConfig, ClusteringResult};
use crate::synth::{
    generate, rng_from_seed, roster_seed, trial_rng, trial_seed, GenScenario, GroundTruth,
    NoiseModel,
};

/// Which noise family the sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// All covariances sigma^2 I; the grid value is sigma itself.
    Fixed,
    /// Per-point diagonal with sd uniform in [sigma_min, sigma_min + width].
    Uniform,
    /// Per-cluster coin between [sigma_min, sigma_min + 1] and
    /// [sigma_max - 1, sigma_max] with sigma_max = sigma_min + width.
    Bimodal,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Fixed => "fixed",
            ScenarioKind::Uniform => "uniform",
            ScenarioKind::Bimodal => "bimodal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(ScenarioKind::Fixed),
            "uniform" => Ok(ScenarioKind::Uniform),
            "bimodal" => Ok(ScenarioKind::Bimodal),
            other => Err(Error::Config(format!(
                "unknown scenario '{other}' (expected fixed, uniform, or bimodal)"
            ))),
        }
    }

    /// The generator noise model at one grid point.
    pub fn noise(self, sigma_min: f64, width: f64) -> NoiseModel {
        match self {
            ScenarioKind::Fixed => NoiseModel::FixedSigma(sigma_min),
            ScenarioKind::Uniform => {
                NoiseModel::UniformDiagonal { sigma_min, sigma_max: sigma_min + width }
            }
            ScenarioKind::Bimodal => {
                NoiseModel::BimodalIntervals { sigma_min, sigma_max: sigma_min + width }
            }
        }
    }
}

/// How an algorithm obtains its working covariances.
#[derive(Debug, Clone, PartialEq)]
pub enum CovPolicy {
    /// The generator's exact per-point covariances.
    Known,
    /// Alias of `Known` matching the diagonal-scenario naming.
    TrueDelta,
    /// Scale MLE with C = I: all covariances sigma_MLE^2 I.
    Mle { p: usize, m: usize },
    /// sigma_min^2 I for every point.
    SigmaMin,
    /// sigma_max^2 I for every point.
    SigmaMax,
    /// ((sigma_min + sigma_max) / 2)^2 I for every point.
    SigmaMean,
    /// Per-point (midpoint of the point's interval)^2 I; needs interval
    /// truth, so only the bimodal scenario supports it.
    MidInterval,
}

impl CovPolicy {
    pub fn parse(s: &str, p: usize, m: usize) -> Result<Self> {
        match s {
            "known" => Ok(CovPolicy::Known),
            "true_delta" => Ok(CovPolicy::TrueDelta),
            "mle" => Ok(CovPolicy::Mle { p, m }),
            "sigma_min" => Ok(CovPolicy::SigmaMin),
            "sigma_max" => Ok(CovPolicy::SigmaMax),
            "sigma_mean" => Ok(CovPolicy::SigmaMean),
            "mid_interval" => Ok(CovPolicy::MidInterval),
            other => Err(Error::Config(format!(
                "unknown covariance policy '{other}' (expected known, true_delta, mle, \
                 sigma_min, sigma_max, sigma_mean, or mid_interval)"
            ))),
        }
    }
}

fn sigma_bounds(noise: &NoiseModel) -> (f64, f64) {
    match noise {
        NoiseModel::FixedSigma(s) => (*s, *s),
        NoiseModel::UniformDiagonal { sigma_min, sigma_max }
        | NoiseModel::BimodalIntervals { sigma_min, sigma_max } => (*sigma_min, *sigma_max),
    }
}

/// Materialize a covariance policy for one generated trial. `seed` feeds the
/// MLE subsample draw; the other policies are deterministic.
pub fn resolve_covariances(
    policy: &CovPolicy,
    data: &Dataset,
    truth: &GroundTruth,
    noise: &NoiseModel,
    seed: u64,
) -> Result<DatasetCovariances> {
    let (sigma_min, sigma_max) = sigma_bounds(noise);
    let scalar = |sigma: f64| -> Result<DatasetCovariances> {
        Ok(DatasetCovariances::Shared(CovarianceModel::scaled_identity(sigma * sigma)?))
    };
    match policy {
        CovPolicy::Known | CovPolicy::TrueDelta => Ok(truth.covariances.clone()),
        CovPolicy::SigmaMin => scalar(sigma_min),
        CovPolicy::SigmaMax => scalar(sigma_max),
        CovPolicy::SigmaMean => scalar((sigma_min + sigma_max) / 2.0),
        CovPolicy::MidInterval => {
            let intervals = truth.intervals.as_ref().ok_or_else(|| {
                Error::Config(
                    "mid_interval policy needs per-point interval truth \
                     (bimodal scenario only)"
                        .into(),
                )
            })?;
            let models = intervals
                .iter()
                .map(|(lo, hi)| {
                    let mid = (lo + hi) / 2.0;
                    CovarianceModel::scaled_identity(mid * mid)
                })
                .collect::<Result<Vec<_>>>()?;
            DatasetCovariances::per_point(models)
        }
        CovPolicy::Mle { p, m } => {
            let cfg = MleConfig {
                p: *p,
                m: *m,
                base_cov: CovarianceModel::ScaledIdentity(1.0),
                bounds: None,
                seed,
            };
            estimate_covariances_mle(data, &cfg)
        }
    }
}

/// One algorithm of a benchmark roster.
#[derive(Debug, Clone)]
pub enum BenchAlgorithm {
    Centrex {
        kernel: String,
        policy: CovPolicy,
        /// `None` applies the separation rule mu_min / (2 d).
        epsilon_f: Option<f64>,
        epsilon_e: f64,
        alpha: f64,
        max_iters: usize,
    },
    MeanShift {
        kernel: String,
        policy: CovPolicy,
        epsilon_f: f64,
        epsilon_e: f64,
        max_iters: usize,
    },
    /// K-means++ given the true K (the known-K baseline).
    KMeansPP { restarts: usize },
    /// K-means++ swept over K in [1, k_max], silhouette argmax.
    XMeans { k_max: usize, restarts: usize },
}

impl BenchAlgorithm {
    fn run(
        &self,
        data: &Dataset,
        truth: &GroundTruth,
        scenario: &GenScenario,
        seed: u64,
    ) -> Result<ClusteringResult> {
        match self {
            BenchAlgorithm::Centrex { kernel, policy, epsilon_f, epsilon_e, alpha, max_iters } => {
                let kernel = Kernel::parse(kernel, data.dim())?;
                let covs =
                    resolve_covariances(policy, data, truth, &scenario.noise, mix(seed, 1))?;
                let eps_f = match epsilon_f {
                    Some(v) => *v,
                    None => separation_rule_epsilon_f(scenario.mu_min, data.dim())?,
                };
                let mut cfg = CentrexConfig::new(kernel, eps_f);
                cfg.epsilon_e = *epsilon_e;
                cfg.alpha = *alpha;
                cfg.max_iters = *max_iters;
                cfg.seed = mix(seed, 2);
                centrex(data, &covs, &cfg)
            }
            BenchAlgorithm::MeanShift { kernel, policy, epsilon_f, epsilon_e, max_iters } => {
                let kernel = Kernel::parse(kernel, data.dim())?;
                let covs =
                    resolve_covariances(policy, data, truth, &scenario.noise, mix(seed, 1))?;
                let cfg = MeanShiftConfig {
                    epsilon_e: *epsilon_e,
                    epsilon_f: *epsilon_f,
                    max_iters: *max_iters,
                };
                meanshift_cluster(data, &covs, &kernel, &cfg)
            }
            BenchAlgorithm::KMeansPP { restarts } => {
                let mut rng = rng_from_seed(mix(seed, 3));
                kmeanspp(data, truth.k(), *restarts, &mut rng)
            }
            BenchAlgorithm::XMeans { k_max, restarts } => {
                let mut rng = rng_from_seed(mix(seed, 3));
                xmeans(data, (1, *k_max), *restarts, &mut rng)
            }
        }
    }
}

fn mix(seed: u64, salt: u64) -> u64 {
    // cheap decorrelation of per-purpose streams inside one roster slot
    seed.rotate_left(17) ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// A named roster slot; the name becomes the CSV `algorithm` column.
#[derive(Debug, Clone)]
pub struct RosterEntry {
    pub name: String,
    pub algorithm: BenchAlgorithm,
}

impl RosterEntry {
    /// Parse a roster string: fields separated by `;`, the first naming the
    /// algorithm, the rest `key=value`. Kernel specs keep their own internal
    /// syntax (so a kernel value may contain `:` and `,`).
    ///
    /// Examples: `centrex;kernel=wald;cov=known`,
    /// `meanshift;kernel=gauss:c=5,sigma=4;cov=sigma_mean;epsilon_f=1`,
    /// `kmeanspp;restarts=10`, `xmeans;kmax=10`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut parts = s.split(';').map(str::trim);
        let head = parts.next().unwrap_or("");
        let mut kv = std::collections::BTreeMap::new();
        for part in parts {
            if part.is_empty() {
                continue;
            }
            let (k, v) = part.split_once('=').ok_or_else(|| {
                Error::Config(format!("roster field '{part}' is not key=value (in '{s}')"))
            })?;
            if kv.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("duplicate roster key '{k}' in '{s}'")));
            }
        }
        let take = |kv: &mut std::collections::BTreeMap<String, String>, key: &str| {
            kv.remove(key)
        };
        let parse_f64 = |v: &str, key: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("roster key {key}={v} is not a number")))
        };
        let parse_usize = |v: &str, key: &str| -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| Error::Config(format!("roster key {key}={v} is not an integer")))
        };
        let mut kv_owned = kv;
        let algorithm = match head {
            "centrex" | "meanshift" => {
                let kernel = take(&mut kv_owned, "kernel").unwrap_or_else(|| "wald".into());
                let p = match take(&mut kv_owned, "P") {
                    Some(v) => parse_usize(&v, "P")?,
                    None => 50,
                };
                let m = match take(&mut kv_owned, "M") {
                    Some(v) => parse_usize(&v, "M")?,
                    None => p,
                };
                let policy_s = take(&mut kv_owned, "cov").unwrap_or_else(|| "known".into());
                let policy = CovPolicy::parse(&policy_s, p, m)?;
                let epsilon_e = match take(&mut kv_owned, "epsilon_e") {
                    Some(v) => parse_f64(&v, "epsilon_e")?,
                    None => 1e-3,
                };
                let max_iters = match take(&mut kv_owned, "max_iters") {
                    Some(v) => parse_usize(&v, "max_iters")?,
                    None => 100,
                };
                let epsilon_f = match take(&mut kv_owned, "epsilon_f") {
                    Some(v) => Some(parse_f64(&v, "epsilon_f")?),
                    None => None,
                };
                if head == "centrex" {
                    let alpha = match take(&mut kv_owned, "alpha") {
                        Some(v) => parse_f64(&v, "alpha")?,
                        None => 1e-3,
                    };
                    BenchAlgorithm::Centrex { kernel, policy, epsilon_f, epsilon_e, alpha, max_iters }
                } else {
                    BenchAlgorithm::MeanShift {
                        kernel,
                        policy,
                        epsilon_f: epsilon_f.unwrap_or(1.0),
                        epsilon_e,
                        max_iters,
                    }
                }
            }
            "kmeanspp" => {
                let restarts = match take(&mut kv_owned, "restarts") {
                    Some(v) => parse_usize(&v, "restarts")?,
                    None => 10,
                };
                BenchAlgorithm::KMeansPP { restarts }
            }
            "xmeans" => {
                let restarts = match take(&mut kv_owned, "restarts") {
                    Some(v) => parse_usize(&v, "restarts")?,
                    None => 10,
                };
                let k_max = match take(&mut kv_owned, "kmax") {
                    Some(v) => parse_usize(&v, "kmax")?,
                    None => 10,
                };
                BenchAlgorithm::XMeans { k_max, restarts }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown roster algorithm '{other}' (expected centrex, meanshift, \
                     kmeanspp, or xmeans)"
                )))
            }
        };
        if let Some(stray) = kv_owned.keys().next() {
            return Err(Error::Config(format!(
                "roster key '{stray}' does not apply to '{head}' (in '{s}')"
            )));
        }
        Ok(RosterEntry { name: s.to_string(), algorithm })
    }
}

/// The full sweep description.
#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub scenario: ScenarioKind,
    /// Template for every grid point; its noise field is replaced per point.
    pub template: GenScenario,
    /// Grid of sigma_min values (sigma for the fixed scenario).
    pub sigma_grid: Vec<f64>,
    /// sigma_max = sigma_min + width for the interval scenarios.
    pub sigma_width: f64,
    pub trials: usize,
    pub roster: Vec<RosterEntry>,
    pub base_seed: u64,
    /// Fill the wall_ms column (off by default: timing breaks byte-level
    /// reproducibility).
    pub timing: bool,
}

impl BenchPlan {
    pub fn new(scenario: ScenarioKind, sigma_grid: Vec<f64>, roster: Vec<RosterEntry>) -> Self {
        BenchPlan {
            scenario,
            template: GenScenario::new(NoiseModel::FixedSigma(1.0)),
            sigma_grid,
            sigma_width: 4.0,
            trials: 50,
            roster,
            base_seed: 0,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.roster.is_empty() {
            return Err(Error::Config("algorithm roster must not be empty".into()));
        }
        if self.sigma_grid.is_empty() {
            return Err(Error::Config("sigma grid must not be empty".into()));
        }
        if self.sigma_grid.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::Config("sigma grid values must be positive".into()));
        }
        if !self.sigma_width.is_finite() || self.sigma_width < 0.0 {
            return Err(Error::Config(format!(
                "sigma width must be nonnegative, got {}",
                self.sigma_width
            )));
        }
        for point in &self.sigma_grid {
            self.scenario_for(*point).validate()?;
        }
        Ok(())
    }

    /// The generator scenario at one grid point.
    pub fn scenario_for(&self, sigma_min: f64) -> GenScenario {
        let mut s = self.template.clone();
        s.noise = self.scenario.noise(sigma_min, self.sigma_width);
        s
    }

    /// Stable FNV-1a hash of the full configuration, for provenance.
    pub fn config_hash(&self) -> u64 {
        let mut desc = String::new();
        let _ = write!(
            desc,
            "scenario={};width={};trials={};seed={};timing={};dim={};n={};k=[{},{}];a={};mu={}",
            self.scenario.name(),
            self.sigma_width,
            self.trials,
            self.base_seed,
            self.timing,
            self.template.dim,
            self.template.n,
            self.template.k_range.0,
            self.template.k_range.1,
            self.template.a,
            self.template.mu_min,
        );
        for s in &self.sigma_grid {
            let _ = write!(desc, ";g={s}");
        }
        for e in &self.roster {
            let _ = write!(desc, ";r={}", e.name);
        }
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in desc.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        h
    }
}

/// One benchmark row: one algorithm on one generated trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub scenario: String,
    /// Derived trial seed; `generate` with this seed reproduces the dataset.
    pub seed: u64,
    pub algorithm: String,
    pub sigma_min: f64,
    pub k_true: Option<usize>,
    pub k_hat: Option<usize>,
    pub error_rate: Option<f64>,
    pub silhouette: Option<f64>,
    pub wall_ms: Option<f64>,
    pub status: String,
}

/// Per-(grid point, algorithm) aggregate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub sigma_min: f64,
    pub algorithm: String,
    pub trials: usize,
    pub failures: usize,
    pub correct_k_prop: Option<f64>,
    pub mean_error_rate: Option<f64>,
    pub mean_k_hat: Option<f64>,
    pub mean_silhouette: Option<f64>,
}

/// Provenance manifest written beside the CSVs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchManifest {
    pub version: String,
    pub config_hash: String,
    pub scenario: String,
    pub sigma_grid: Vec<f64>,
    pub sigma_width: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub dim: usize,
    pub n: usize,
    pub roster: Vec<String>,
    pub timing: bool,
}

/// Everything a sweep produced.
#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub rows: Vec<BenchRow>,
    pub summaries: Vec<SummaryRow>,
    pub manifest: BenchManifest,
}

fn sanitize(msg: &str) -> String {
    msg.replace(',', ";").replace('\n', " ")
}

fn opt_cell<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, |x| x.to_string())
}

impl BenchOutput {
    /// The per-trial rows as CSV (shortest round-trip float formatting).
    pub fn rows_csv(&self) -> String {
        let mut out = String::from(
            "scenario,seed,algorithm,sigma_min,K_true,K_hat,error_rate,silhouette,wall_ms,status\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.scenario,
                r.seed,
                r.algorithm,
                r.sigma_min,
                opt_cell(&r.k_true),
                opt_cell(&r.k_hat),
                opt_cell(&r.error_rate),
                opt_cell(&r.silhouette),
                opt_cell(&r.wall_ms),
                r.status,
            );
        }
        out
    }

    /// The per-grid-point aggregates as CSV.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "scenario,sigma_min,algorithm,trials,failures,correct_k_prop,mean_error_rate,mean_K_hat,mean_silhouette\n",
        );
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                s.scenario,
                s.sigma_min,
                s.algorithm,
                s.trials,
                s.failures,
                opt_cell(&s.correct_k_prop),
                opt_cell(&s.mean_error_rate),
                opt_cell(&s.mean_k_hat),
                opt_cell(&s.mean_silhouette),
            );
        }
        out
    }
}

fn run_trial(plan: &BenchPlan, grid_index: usize, trial_index: usize) -> Vec<BenchRow> {
    let sigma_min = plan.sigma_grid[grid_index];
    let scenario = plan.scenario_for(sigma_min);
    let seed = trial_seed(plan.base_seed, grid_index as u64, trial_index as u64);
    let scen_name = plan.scenario.name().to_string();
    let mut rng = trial_rng(plan.base_seed, grid_index as u64, trial_index as u64);
    let generated = generate(&scenario, &mut rng);
    plan.roster
        .iter()
        .enumerate()
        .map(|(ri, entry)| {
            let mut row = BenchRow {
                scenario: scen_name.clone(),
                seed,
                algorithm: entry.name.clone(),
                sigma_min,
                k_true: None,
                k_hat: None,
                error_rate: None,
                silhouette: None,
                wall_ms: None,
                status: String::new(),
            };
            match &generated {
                Err(e) => row.status = format!("error: generation: {}", sanitize(&e.to_string())),
                Ok((data, truth)) => {
                    row.k_true = Some(truth.k());
                    let alg_seed = roster_seed(
                        plan.base_seed,
                        grid_index as u64,
                        trial_index as u64,
                        ri as u64,
                    );
                    let start = Instant::now();
                    let outcome = entry
                        .algorithm
                        .run(data, truth, &scenario, alg_seed)
                        .and_then(|result| evaluate(truth, &result, data));
                    let elapsed = start.elapsed().as_secs_f64() * 1e3;
                    match outcome {
                        Ok(report) => {
                            row.k_hat = Some(report.k_hat);
                            row.error_rate = Some(report.error_rate);
                            row.silhouette = Some(report.silhouette);
                            if plan.timing {
                                row.wall_ms = Some(elapsed);
                            }
                            row.status = "ok".into();
                        }
                        Err(e) => row.status = format!("error: {}", sanitize(&e.to_string())),
                    }
                }
            }
            row
        })
        .collect()
}

fn summarize(plan: &BenchPlan, rows: &[BenchRow]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for (gi, &sigma_min) in plan.sigma_grid.iter().enumerate() {
        for (ri, entry) in plan.roster.iter().enumerate() {
            let mut ok = 0usize;
            let mut failures = 0usize;
            let (mut correct, mut err_sum, mut k_sum, mut sil_sum) = (0usize, 0.0, 0.0, 0.0);
            for ti in 0..plan.trials {
                let row = &rows[(gi * plan.trials + ti) * plan.roster.len() + ri];
                if row.status == "ok" {
                    ok += 1;
                    if row.k_hat == row.k_true {
                        correct += 1;
                    }
                    err_sum += row.error_rate.unwrap_or(f64::NAN);
                    k_sum += row.k_hat.unwrap_or(0) as f64;
                    sil_sum += row.silhouette.unwrap_or(f64::NAN);
                } else {
                    failures += 1;
                }
            }
            let mean = |sum: f64| if ok > 0 { Some(sum / ok as f64) } else { None };
            out.push(SummaryRow {
                scenario: plan.scenario.name().to_string(),
                sigma_min,
                algorithm: entry.name.clone(),
                trials: plan.trials,
                failures,
                correct_k_prop: if ok > 0 { Some(correct as f64 / ok as f64) } else { None },
                mean_error_rate: mean(err_sum),
                mean_k_hat: mean(k_sum),
                mean_silhouette: mean(sil_sum),
            });
        }
    }
    out
}

/// Execute the sweep: grid x trials in parallel on the ambient rayon pool,
/// rows in deterministic order regardless of scheduling. Individual trial
/// failures are flagged in their rows; the sweep itself only fails on an
/// invalid plan.
pub fn run_bench(plan: &BenchPlan) -> Result<BenchOutput> {
    plan.validate()?;
    for entry in &plan.roster {
        // surface roster-wide config errors (bad kernel spec, bad K range)
        // before burning trial time; per-trial errors still flag rows
        if let BenchAlgorithm::Centrex { kernel, .. } | BenchAlgorithm::MeanShift { kernel, .. } =
            &entry.algorithm
        {
            Kernel::parse(kernel, plan.template.dim)?;
        }
    }
    let tasks: Vec<(usize, usize)> = (0..plan.sigma_grid.len())
        .flat_map(|gi| (0..plan.trials).map(move |ti| (gi, ti)))
        .collect();
    let nested: Vec<Vec<BenchRow>> = tasks
        .par_iter()
        .map(|&(gi, ti)| run_trial(plan, gi, ti))
        .collect();
    let rows: Vec<BenchRow> = nested.into_iter().flatten().collect();
    let summaries = summarize(plan, &rows);
    let manifest = BenchManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: format!("{:016x}", plan.config_hash()),
        scenario: plan.scenario.name().to_string(),
        sigma_grid: plan.sigma_grid.clone(),
        sigma_width: plan.sigma_width,
        trials: plan.trials,
        base_seed: plan.base_seed,
        dim: plan.template.dim,
        n: plan.template.n,
        roster: plan.roster.iter().map(|e| e.name.clone()).collect(),
        timing: plan.timing,
    };
    Ok(BenchOutput { rows, summaries, manifest })
}
