//! Solver timing harness.
//!
//! Times classification of seeded synthetic episodes across feature-map
//! resolutions for every solver route, after gating on cross-solver
//! agreement. Workload generation is excluded from timing, warm-up episodes
//! are discarded, and the same seed always produces the same inputs, so runs
//! are comparable. Absolute milliseconds are machine-specific; only
//! orderings and scaling trends are meaningful.
//!
//! Timing runs single-threaded in this module; the BLAS backend may still
//! thread internally unless `OPENBLAS_NUM_THREADS=1` is set.

use std::time::Instant;

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use rand::Rng;

use crate::affinity::{build_transitions, cosine_affinity};
use crate::centrality::{solve, SolverConfig, SolverMethod, DEFAULT_EIGEN_ALPHA};
use crate::classifier::class_block_sums;
use crate::episode::FeatureMatrix;
use crate::error::{Error, Result};
use crate::synth::{template_matrix, DEFAULT_TEMPLATE_SIGMA};

/// Warm-up episodes run before timing starts, per solver and resolution.
pub const WARMUP_EPISODES: usize = 5;
/// Cross-solver agreement required before timings are reported.
pub const AGREEMENT_TOL: f64 = 2e-3;

const BENCH_GAMMA: f64 = 20.0;
const BENCH_BETA: f64 = 10.0;

/// Workload description for [`run_bench`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchConfig {
    /// Local-feature counts r to sweep (e.g. 25 for a 5x5 feature map).
    pub resolutions: Vec<usize>,
    pub n_classes: usize,
    /// Query images per class; each is classified independently and one
    /// episode's time sums all of them.
    pub n_query: usize,
    pub d: usize,
    /// Timed episodes per row (after warm-up).
    pub episodes: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            resolutions: vec![25, 64, 144],
            n_classes: 5,
            n_query: 15,
            d: 64,
            episodes: 30,
            seed: 0,
        }
    }
}

/// One timed (solver, resolution) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub solver: String,
    pub r: usize,
    pub n: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub episodes: usize,
}

/// All rows of a run plus a note describing the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub env: String,
}

/// Output rendering for [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Json,
}

const BENCH_METHODS: [SolverMethod; 4] = [
    SolverMethod::KatzClosedForm,
    SolverMethod::LinearSystem,
    SolverMethod::PowerIteration,
    SolverMethod::KatzBlockInverse,
];

struct EpisodeData {
    support_flat: FeatureMatrix,
    queries: Vec<FeatureMatrix>,
}

/// Unit-norm random features clustered around per-class templates. The
/// clustering keeps the walk chains well mixed, which the cross-solver
/// agreement gate requires; fully independent features at these softmax
/// scales occasionally produce near-reducible chains.
fn generate_episode(config: &BenchConfig, r: usize, episode_idx: usize) -> EpisodeData {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(((r as u64) << 32) | episode_idx as u64);
    let templates: Vec<ndarray::Array1<f64>> = (0..config.n_classes)
        .map(|_| {
            ndarray::Array1::from_iter(
                (0..config.d).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)),
            )
        })
        .collect();
    let mut support = ndarray::Array2::zeros((config.d, config.n_classes * r));
    for (c, template) in templates.iter().enumerate() {
        let block = template_matrix(&mut rng, template, DEFAULT_TEMPLATE_SIGMA, r);
        support
            .slice_mut(ndarray::s![.., c * r..(c + 1) * r])
            .assign(block.data());
    }
    let support_flat = FeatureMatrix::new(support).expect("generated matrix is finite");
    let queries = (0..config.n_classes * config.n_query)
        .map(|_| {
            let class = rng.random_range(0..config.n_classes);
            template_matrix(&mut rng, &templates[class], DEFAULT_TEMPLATE_SIGMA, r)
        })
        .collect();
    EpisodeData { support_flat, queries }
}

fn classify_query(
    support_flat: &FeatureMatrix,
    query: &FeatureMatrix,
    n_classes: usize,
    solver: &SolverConfig,
) -> Result<Vec<f64>> {
    let phi = cosine_affinity(query, support_flat)?;
    let pair = build_transitions(&phi, BENCH_GAMMA, BENCH_BETA)?;
    let centrality = solve(&pair, solver)?;
    Ok(class_block_sums(
        centrality.pi_s().as_slice().expect("contiguous"),
        n_classes,
    ))
}

fn solver_config(method: SolverMethod) -> SolverConfig {
    SolverConfig { method, alpha: DEFAULT_EIGEN_ALPHA, ..SolverConfig::default() }
}

/// Times every solver at every resolution on identical seeded workloads.
///
/// For each resolution, all solvers first classify the same gate episode and
/// must agree within [`AGREEMENT_TOL`] per class; a disagreement aborts the
/// run instead of reporting timings for inconsistent solvers.
pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    if config.resolutions.is_empty() {
        return Err(Error::Parameter("no resolutions to benchmark".into()));
    }
    if config.n_classes == 0
        || config.n_query == 0
        || config.d == 0
        || config.episodes == 0
        || config.resolutions.iter().any(|&r| r == 0)
    {
        return Err(Error::Parameter(
            "benchmark counts must all be positive".into(),
        ));
    }

    let mut rows = Vec::new();
    for &r in &config.resolutions {
        gate_agreement(config, r)?;
        for method in BENCH_METHODS {
            let solver = solver_config(method);
            let mut samples = Vec::with_capacity(config.episodes);
            for episode_idx in 0..WARMUP_EPISODES + config.episodes {
                let data = generate_episode(config, r, episode_idx);
                let start = Instant::now();
                for query in &data.queries {
                    classify_query(&data.support_flat, query, config.n_classes, &solver)?;
                }
                let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
                if episode_idx >= WARMUP_EPISODES {
                    samples.push(elapsed_ms);
                }
            }
            let (mean_ms, std_ms) = mean_std(&samples);
            rows.push(BenchRow {
                solver: method.name().to_string(),
                r,
                n: config.n_classes,
                mean_ms,
                std_ms,
                episodes: samples.len(),
            });
        }
    }
    Ok(BenchReport { rows, env: environment_note() })
}

fn gate_agreement(config: &BenchConfig, r: usize) -> Result<()> {
    let data = generate_episode(config, r, 0);
    for query in &data.queries {
        let dists: Vec<Vec<f64>> = BENCH_METHODS
            .iter()
            .map(|&m| {
                classify_query(&data.support_flat, query, config.n_classes, &solver_config(m))
            })
            .collect::<Result<_>>()?;
        for i in 1..dists.len() {
            let gap = dists[0]
                .iter()
                .zip(&dists[i])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if gap > AGREEMENT_TOL {
                return Err(Error::Numerical(format!(
                    "solvers {} and {} disagree by {gap:.3e} at r={r}; refusing to time \
                     inconsistent solvers",
                    BENCH_METHODS[0].name(),
                    BENCH_METHODS[i].name()
                )));
            }
        }
    }
    Ok(())
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn environment_note() -> String {
    let profile = if cfg!(debug_assertions) { "debug" } else { "release" };
    let blas_threads = std::env::var("OPENBLAS_NUM_THREADS")
        .map(|v| format!("OPENBLAS_NUM_THREADS={v}"))
        .unwrap_or_else(|_| "OPENBLAS_NUM_THREADS unset".into());
    format!(
        "{} {}, {profile} build, single-threaded dispatch, {blas_threads}",
        std::env::consts::OS,
        std::env::consts::ARCH
    )
}

/// Renders a report as an aligned table or as JSON
/// (`{"rows":[{"solver","r","n","mean_ms","std_ms","episodes"}],"env"}`).
pub fn emit_report(report: &BenchReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Table => {
            let mut out = String::new();
            out.push_str(&format!(
                "{:<12} {:>6} {:>4} {:>12} {:>10} {:>10}\n",
                "solver", "r", "n", "mean_ms", "std_ms", "episodes"
            ));
            for row in &report.rows {
                out.push_str(&format!(
                    "{:<12} {:>6} {:>4} {:>12.4} {:>10.4} {:>10}\n",
                    row.solver, row.r, row.n, row.mean_ms, row.std_ms, row.episodes
                ));
            }
            out.push_str(&format!("env: {}\n", report.env));
            out
        }
    }
}

/// The per-query work the harness times, exposed so examples and tests can
/// classify one query exactly the way a bench row does.
pub fn bench_classify(
    support_flat: &FeatureMatrix,
    query: &FeatureMatrix,
    n_classes: usize,
    method: SolverMethod,
) -> Result<Vec<f64>> {
    classify_query(support_flat, query, n_classes, &solver_config(method))
}

/// Stationary support mass per class for one bench query; helper for tests
/// comparing a bench workload against the simulator.
pub fn bench_reference_distribution(
    support_flat: &FeatureMatrix,
    query: &FeatureMatrix,
    n_classes: usize,
) -> Result<Array1<f64>> {
    let dist = classify_query(
        support_flat,
        query,
        n_classes,
        &solver_config(SolverMethod::PowerIteration),
    )?;
    Ok(Array1::from_vec(dist))
}
