//! `centrex` — dataset generation, clustering runs, sigma-sweep benchmarks,
//! and scale-MLE estimation from the command line.
//!
//! Exit codes: 0 success, 2 usage/configuration error (bad flags, bad files,
//! invalid parameter combinations), 3 numeric/runtime failure.
//! Set `CLUST_LOG` (error|warn|info|debug|trace) for diagnostics.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use centrex::baselines::{kmeanspp, meanshift_cluster, xmeans, MeanShiftConfig};
use centrex::bench::{run_bench, BenchPlan, RosterEntry, ScenarioKind};
use centrex::geometry::CovarianceSpec;
use centrex::metrics::evaluate;
use centrex::mle::{estimate_sigma_mle, MleConfig, MleReport};
use centrex::pipeline::centrex as run_centrex;
use centrex::synth::{
    generate, load_csv, rng_from_seed, write_csv, GenScenario, GroundTruth, NoiseModel,
    TruthSidecar,
};
use centrex::{
    CentrexConfig, CovarianceModel, Dataset, DatasetCovariances, Error, Kernel, Result,
};

#[derive(Parser)]
#[command(
    name = "centrex",
    version,
    about = "Covariance-aware mean-shift clustering: generate data, cluster, benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset CSV plus a truth JSON sidecar.
    Generate(GenerateArgs),
    /// Cluster a CSV of points and emit the result as JSON.
    Cluster(ClusterArgs),
    /// Run a sigma-sweep benchmark grid and emit row/summary CSVs.
    Bench(BenchArgs),
    /// Estimate the covariance scale by maximum likelihood and emit JSON.
    EstimateSigma(EstimateSigmaArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Noise family: fixed | uniform | bimodal.
    #[arg(long, default_value = "fixed")]
    scenario: String,
    /// Noise sd (fixed) or lower interval end sigma_min (uniform/bimodal).
    #[arg(long, default_value_t = 5.0)]
    sigma: f64,
    /// Upper interval end for uniform/bimodal (default: sigma + 4).
    #[arg(long)]
    sigma_max: Option<f64>,
    /// Points per dataset.
    #[arg(long, default_value_t = 400)]
    n: usize,
    /// Ambient dimension.
    #[arg(long, default_value_t = 100)]
    d: usize,
    /// Smallest admissible cluster count.
    #[arg(long, default_value_t = 2)]
    k_min: usize,
    /// Largest admissible cluster count.
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    /// Centroid scale: centroids are drawn from N(0, A^2 I).
    #[arg(long, default_value_t = 20.0)]
    a: f64,
    /// Minimum pairwise centroid distance.
    #[arg(long, default_value_t = 200.0)]
    mu_min: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output stem: writes <out>.csv and <out>.truth.json.
    #[arg(long, default_value = "dataset")]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Algo {
    Centrex,
    Meanshift,
    Kmeanspp,
    Xmeans,
}

#[derive(Args)]
struct ClusterArgs {
    /// Input CSV: one point per row, optional header, optional `label` column.
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = Algo::Centrex)]
    algo: Algo,
    /// Kernel spec: wald | gauss:c=<c>,sigma=<s> | exp:h=<h> | flat:h=<h>.
    #[arg(long, default_value = "wald")]
    kernel: String,
    /// Wald marking level.
    #[arg(long, default_value_t = 1e-3)]
    alpha: f64,
    /// Fixed-point stopping tolerance.
    #[arg(long, default_value_t = 1e-3)]
    epsilon_e: f64,
    /// Fusion threshold on centroid distance / dimension.
    #[arg(long, default_value_t = 1.0)]
    epsilon_f: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Covariance policy: identity | scaled:<sigma2> | scaled:auto-mle |
    /// diag:<v1,v2,...> | file:<spec.json>.
    #[arg(long, default_value = "identity")]
    cov: String,
    /// Cluster count for kmeanspp.
    #[arg(long)]
    k: Option<usize>,
    /// Largest K tried by xmeans.
    #[arg(long, default_value_t = 10)]
    kmax: usize,
    /// Restarts for kmeanspp/xmeans.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Subsample size P for scaled:auto-mle.
    #[arg(long = "P", default_value_t = 50)]
    p: usize,
    /// Order statistic count M for scaled:auto-mle (default: P).
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Truth JSON (a generate sidecar or bare truth) to evaluate against.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Noise family swept: fixed | uniform | bimodal.
    #[arg(long, default_value = "fixed")]
    scenario: String,
    /// Comma-separated sigma_min grid.
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,20,30,40")]
    grid: Vec<f64>,
    /// Interval width: sigma_max = sigma_min + width (uniform/bimodal).
    #[arg(long, default_value_t = 4.0)]
    width: f64,
    /// Trials per grid point.
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// Roster entry, repeatable. Grammar: `<algo>[;key=value]...`, e.g.
    /// "centrex;kernel=wald;cov=known", "meanshift;cov=sigma_mean",
    /// "kmeanspp;restarts=10", "xmeans;kmax=10".
    #[arg(long = "roster", required = true)]
    roster: Vec<String>,
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    k_min: usize,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    #[arg(long, default_value_t = 20.0)]
    a: f64,
    #[arg(long, default_value_t = 200.0)]
    mu_min: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fill the wall_ms column (breaks byte-level reproducibility).
    #[arg(long)]
    timing: bool,
    /// Rows CSV path; also writes <stem>.summary.csv and <stem>.manifest.json.
    #[arg(long, default_value = "bench.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateSigmaArgs {
    /// Input CSV of points.
    data: PathBuf,
    /// Subsample size P.
    #[arg(long = "P", default_value_t = 50)]
    p: usize,
    /// Order statistic count M (default: P).
    #[arg(long = "M")]
    m: Option<usize>,
    /// Base covariance C: identity | scaled:<sigma2> | diag:<v1,v2,...> |
    /// file:<spec.json> (shared specs only).
    #[arg(long = "C", default_value = "identity")]
    c: String,
    /// Search bounds for sigma as `lo,hi` (default: automatic).
    #[arg(long, value_delimiter = ',')]
    bounds: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CLUST_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    std::process::exit(code);
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numeric(_) | Error::Infeasible(_) => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Cluster(args) => cmd_cluster(args),
        Command::Bench(args) => cmd_bench(args),
        Command::EstimateSigma(args) => cmd_estimate_sigma(args),
    }
}

/// Scenario parameters echoed into the truth sidecar for provenance.
#[derive(Serialize, Deserialize)]
struct ScenarioEcho {
    d: usize,
    n: usize,
    k_min: usize,
    k_max: usize,
    a: f64,
    mu_min: f64,
    sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_max: Option<f64>,
}

/// The JSON written next to a generated dataset.
#[derive(Serialize, Deserialize)]
struct GeneratedSidecar {
    scenario: String,
    seed: u64,
    params: ScenarioEcho,
    truth: TruthSidecar,
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let kind = ScenarioKind::parse(&args.scenario)?;
    let noise = match kind {
        ScenarioKind::Fixed => NoiseModel::FixedSigma(args.sigma),
        ScenarioKind::Uniform => NoiseModel::UniformDiagonal {
            sigma_min: args.sigma,
            sigma_max: args.sigma_max.unwrap_or(args.sigma + 4.0),
        },
        ScenarioKind::Bimodal => NoiseModel::BimodalIntervals {
            sigma_min: args.sigma,
            sigma_max: args.sigma_max.unwrap_or(args.sigma + 4.0),
        },
    };
    let scenario = GenScenario {
        noise,
        dim: args.d,
        n: args.n,
        k_range: (args.k_min, args.k_max),
        a: args.a,
        mu_min: args.mu_min,
    };
    scenario.validate()?;
    let mut rng = rng_from_seed(args.seed);
    let (data, truth) = generate(&scenario, &mut rng)?;

    let stem = args.out.display().to_string();
    let csv_path = PathBuf::from(format!("{stem}.csv"));
    let truth_path = PathBuf::from(format!("{stem}.truth.json"));
    let mut csv_file = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
    write_csv(&data, None, &mut csv_file)?;
    csv_file.flush()?;

    let sidecar = GeneratedSidecar {
        scenario: kind.name().to_string(),
        seed: args.seed,
        params: ScenarioEcho {
            d: args.d,
            n: args.n,
            k_min: args.k_min,
            k_max: args.k_max,
            a: args.a,
            mu_min: args.mu_min,
            sigma: args.sigma,
            sigma_max: args.sigma_max,
        },
        truth: TruthSidecar::from_truth(&truth)?,
    };
    write_json(&truth_path, &sidecar)?;
    log::info!(
        "wrote {} ({} points, d={}, K={}) and {}",
        csv_path.display(),
        data.len(),
        data.dim(),
        truth.k(),
        truth_path.display()
    );
    Ok(())
}

/// A `--cov` / `--C` argument, parsed.
enum CovArg {
    Model(DatasetCovariances),
    AutoMle,
}

fn parse_cov_arg(s: &str, n: usize) -> Result<CovArg> {
    if s == "scaled:auto-mle" {
        return Ok(CovArg::AutoMle);
    }
    if s == "identity" {
        return Ok(CovArg::Model(DatasetCovariances::Shared(CovarianceModel::ScaledIdentity(1.0))));
    }
    if let Some(rest) = s.strip_prefix("scaled:") {
        let sigma2: f64 = rest
            .parse()
            .map_err(|_| Error::Config(format!("bad scaled covariance '{s}'")))?;
        return Ok(CovArg::Model(DatasetCovariances::Shared(CovarianceModel::scaled_identity(
            sigma2,
        )?)));
    }
    if let Some(rest) = s.strip_prefix("diag:") {
        let entries = rest
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad diagonal entry '{f}' in '{s}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        return Ok(CovArg::Model(DatasetCovariances::Shared(CovarianceModel::diagonal(entries)?)));
    }
    if let Some(path) = s.strip_prefix("file:") {
        let text = std::fs::read_to_string(path)?;
        // either a covariance spec or a truth sidecar whose exact
        // covariances are reused
        if let Ok(spec) = serde_json::from_str::<CovarianceSpec>(&text) {
            return Ok(CovArg::Model(spec.to_covariances(n)?));
        }
        let truth = load_truth_file(Path::new(path)).map_err(|_| {
            Error::Config(format!(
                "{path}: neither a covariance spec (kind = shared_scaled_identity | \
                 shared_diagonal | per_point_diagonal) nor a truth sidecar"
            ))
        })?;
        let covs = truth.covariances;
        if let DatasetCovariances::PerPoint(models) = &covs {
            if models.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: models.len() });
            }
        }
        return Ok(CovArg::Model(covs));
    }
    Err(Error::Config(format!(
        "unknown covariance policy '{s}' (expected identity, scaled:<sigma2>, \
         scaled:auto-mle, diag:<v1,v2,...>, or file:<spec.json>)"
    )))
}

fn load_truth_file(path: &Path) -> Result<GroundTruth> {
    let text = std::fs::read_to_string(path)?;
    let sidecar = match serde_json::from_str::<GeneratedSidecar>(&text) {
        Ok(g) => g.truth,
        Err(_) => serde_json::from_str::<TruthSidecar>(&text)
            .map_err(|e| Error::Config(format!("truth file {}: {e}", path.display())))?,
    };
    sidecar.into_truth()
}

/// Build label-only truth from a CSV label column: compact the labels and use
/// per-label means as centroids.
fn truth_from_labels(data: &Dataset, labels: &[usize]) -> Result<GroundTruth> {
    let mut distinct: Vec<usize> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let index_of = |l: usize| distinct.binary_search(&l).expect("label present");
    let k = distinct.len();
    let d = data.dim();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    let mut compact = Vec::with_capacity(labels.len());
    for (i, &l) in labels.iter().enumerate() {
        let c = index_of(l);
        compact.push(c);
        counts[c] += 1;
        for (s, x) in sums[c].iter_mut().zip(data.point(i)) {
            *s += x;
        }
    }
    let centroids = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| s.into_iter().map(|v| v / c as f64).collect())
        .collect();
    Ok(GroundTruth {
        centroids,
        labels: compact,
        covariances: DatasetCovariances::Shared(CovarianceModel::ScaledIdentity(1.0)),
        intervals: None,
    })
}

fn cmd_cluster(args: ClusterArgs) -> Result<()> {
    let csv = load_csv(&args.data, None)?;
    let data = csv.data;
    let n = data.len();
    let dim = data.dim();

    let mut sigma_mle: Option<MleReport> = None;
    let covs = match parse_cov_arg(&args.cov, n)? {
        CovArg::Model(m) => m,
        CovArg::AutoMle => {
            let cfg = MleConfig {
                p: args.p,
                m: args.m.unwrap_or(args.p),
                base_cov: CovarianceModel::ScaledIdentity(1.0),
                bounds: None,
                seed: args.seed,
            };
            let report = estimate_sigma_mle(&data, &cfg)?;
            let covs = DatasetCovariances::Shared(CovarianceModel::scaled_identity(
                report.sigma_mle * report.sigma_mle,
            )?);
            sigma_mle = Some(report);
            covs
        }
    };

    let result = match args.algo {
        Algo::Centrex => {
            let kernel = Kernel::parse(&args.kernel, dim)?;
            let mut cfg = CentrexConfig::new(kernel, args.epsilon_f);
            cfg.alpha = args.alpha;
            cfg.epsilon_e = args.epsilon_e;
            cfg.max_iters = args.max_iters;
            cfg.seed = args.seed;
            run_centrex(&data, &covs, &cfg)?
        }
        Algo::Meanshift => {
            let kernel = Kernel::parse(&args.kernel, dim)?;
            let cfg = MeanShiftConfig {
                epsilon_e: args.epsilon_e,
                epsilon_f: args.epsilon_f,
                max_iters: args.max_iters,
            };
            meanshift_cluster(&data, &covs, &kernel, &cfg)?
        }
        Algo::Kmeanspp => {
            let k = args
                .k
                .ok_or_else(|| Error::Config("kmeanspp needs --k <clusters>".into()))?;
            let mut rng = rng_from_seed(args.seed);
            kmeanspp(&data, k, args.restarts, &mut rng)?
        }
        Algo::Xmeans => {
            let mut rng = rng_from_seed(args.seed);
            xmeans(&data, (1, args.kmax), args.restarts, &mut rng)?
        }
    };

    let truth = match &args.truth {
        Some(path) => Some(load_truth_file(path)?),
        None => csv.labels.as_ref().map(|ls| truth_from_labels(&data, ls)).transpose()?,
    };

    let mut value = to_json(&result)?;
    let obj = value.as_object_mut().expect("result serializes to an object");
    if let Some(report) = &sigma_mle {
        obj.insert("sigma_mle".into(), to_json(report)?);
    }
    if let Some(truth) = &truth {
        let eval = evaluate(truth, &result, &data)?;
        obj.insert("eval".into(), to_json(&eval)?);
    }
    emit_json(args.out.as_deref(), &value)
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let kind = ScenarioKind::parse(&args.scenario)?;
    let roster = args
        .roster
        .iter()
        .map(|s| RosterEntry::parse(s))
        .collect::<Result<Vec<_>>>()?;
    let mut plan = BenchPlan::new(kind, args.grid.clone(), roster);
    plan.template = GenScenario {
        noise: NoiseModel::FixedSigma(1.0), // replaced per grid point
        dim: args.d,
        n: args.n,
        k_range: (args.k_min, args.k_max),
        a: args.a,
        mu_min: args.mu_min,
    };
    plan.sigma_width = args.width;
    plan.trials = args.trials;
    plan.base_seed = args.seed;
    plan.timing = args.timing;

    let out = run_bench(&plan)?;

    let stem = {
        let mut s = args.out.clone();
        s.set_extension("");
        s.display().to_string()
    };
    let rows_path = if args.out.extension().is_some() {
        args.out.clone()
    } else {
        PathBuf::from(format!("{stem}.csv"))
    };
    let summary_path = PathBuf::from(format!("{stem}.summary.csv"));
    let manifest_path = PathBuf::from(format!("{stem}.manifest.json"));
    std::fs::write(&rows_path, out.rows_csv())?;
    std::fs::write(&summary_path, out.summary_csv())?;
    write_json(&manifest_path, &out.manifest)?;
    log::info!(
        "wrote {} rows to {}, {} summary rows to {}, manifest to {}",
        out.rows.len(),
        rows_path.display(),
        out.summaries.len(),
        summary_path.display(),
        manifest_path.display()
    );
    Ok(())
}

fn cmd_estimate_sigma(args: EstimateSigmaArgs) -> Result<()> {
    let csv = load_csv(&args.data, None)?;
    let data = csv.data;
    let base_cov = match parse_cov_arg(&args.c, data.len())? {
        CovArg::Model(DatasetCovariances::Shared(m)) => m,
        CovArg::Model(_) => {
            return Err(Error::Config(
                "--C must be a single shared covariance, not per-point".into(),
            ))
        }
        CovArg::AutoMle => {
            return Err(Error::Config("scaled:auto-mle is not a valid base covariance".into()))
        }
    };
    let bounds = match &args.bounds {
        None => None,
        Some(v) if v.len() == 2 => Some((v[0], v[1])),
        Some(v) => {
            return Err(Error::Config(format!("--bounds takes lo,hi (got {} values)", v.len())))
        }
    };
    let cfg = MleConfig {
        p: args.p,
        m: args.m.unwrap_or(args.p),
        base_cov,
        bounds,
        seed: args.seed,
    };
    let report = estimate_sigma_mle(&data, &cfg)?;
    emit_json(args.out.as_deref(), &to_json(&report)?)
}

fn to_json<T: Serialize>(value: &T) -> Result<serde_json::Value> {
    serde_json::to_value(value).map_err(|e| Error::Numeric(format!("JSON encoding: {e}")))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numeric(format!("JSON encoding: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn emit_json(out: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numeric(format!("JSON encoding: {e}")))?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}
