//! Command-line surface.
//!
//! Subcommands: `classify`, `centrality`, `simulate`, `pool`, `bench`,
//! `gen`. Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
//! failure. Errors print to stderr as a single line.

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{emit_report, run_bench, BenchConfig, ReportFormat};
use crate::centrality::{
    eigen_approx, solve, CentralityPair, SolverConfig, SolverMethod, DEFAULT_EIGEN_ALPHA,
    DEFAULT_KATZ_ALPHA, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::classifier::{classify_katz, ClassDistribution};
use crate::episode::Episode;
use crate::error::{Error, Result};
use crate::io::{load_episode, save_document, EpisodeDocument, EpisodeFormat};
use crate::pooling::centrality_pool_episode;
use crate::classifier::class_block_sums;
use crate::synth::{template_shots, uniform_shots, DEFAULT_TEMPLATE_SIGMA};
use crate::walker::{estimate_class_distribution, simulate};
use crate::affinity;

#[derive(Parser)]
#[command(
    name = "affnet",
    version,
    about = "Bipartite random-walk centrality for dense-feature episodes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify an episode's query against its support classes.
    Classify(ClassifyArgs),
    /// Print the support- and query-side centralities of an episode.
    Centrality(CentralityArgs),
    /// Monte Carlo walk over an episode's transition pair.
    Simulate(SimulateArgs),
    /// Centrality-weighted pooled feature vectors of an episode.
    Pool(PoolArgs),
    /// Time the solvers on synthetic workloads.
    Bench(BenchArgs),
    /// Write a synthetic episode file.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    /// Eigenvector approximation: block-inverse Katz at alpha near 1.
    Eigen,
    /// Power iteration on the composed chain.
    Power,
    /// Least squares on the stacked stationarity system.
    Linear,
    /// Katz via dense resolvent inverse.
    KatzClosed,
    /// Katz via the r x r block inverse.
    KatzBlock,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum OutputArg {
    Table,
    Json,
}

#[derive(Args)]
struct SolverArgs {
    /// Query-to-support softmax scale.
    #[arg(long, default_value_t = 20.0)]
    gamma: f64,
    /// Support-to-query softmax scale.
    #[arg(long, default_value_t = 10.0)]
    beta: f64,
    /// Attenuation factor; defaults to 0.999 (eigen approximation) or 0.5
    /// with --katz.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum, default_value_t = MethodArg::Eigen)]
    method: MethodArg,
    /// Convergence tolerance for power iteration.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Iteration cap for power iteration.
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
}

impl SolverArgs {
    fn validate(&self) -> std::result::Result<(), String> {
        if !(self.gamma > 0.0) || !(self.beta > 0.0) {
            return Err(format!(
                "gamma and beta must be positive (got {} and {})",
                self.gamma, self.beta
            ));
        }
        if let Some(alpha) = self.alpha {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(format!("alpha must lie in (0, 1), got {alpha}"));
            }
        }
        if !(self.tol > 0.0) {
            return Err(format!("tol must be positive, got {}", self.tol));
        }
        Ok(())
    }

    fn config(&self) -> SolverConfig {
        let method = match self.method {
            MethodArg::Eigen | MethodArg::KatzBlock => SolverMethod::KatzBlockInverse,
            MethodArg::Power => SolverMethod::PowerIteration,
            MethodArg::Linear => SolverMethod::LinearSystem,
            MethodArg::KatzClosed => SolverMethod::KatzClosedForm,
        };
        SolverConfig {
            method,
            alpha: self.alpha.unwrap_or(DEFAULT_EIGEN_ALPHA),
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    fn centrality(&self, episode: &Episode) -> Result<CentralityPair> {
        let pair = affinity::transition_pair(episode, self.gamma, self.beta)?;
        match self.method {
            // the eigen route keeps its narrower alpha check
            MethodArg::Eigen => eigen_approx(&pair, self.alpha.unwrap_or(DEFAULT_EIGEN_ALPHA)),
            _ => solve(&pair, &self.config()),
        }
    }
}

#[derive(Args)]
struct ClassifyArgs {
    /// Episode file (binary or text).
    #[arg(long)]
    episode: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Score classes by Katz accessibility instead of the stationary mass.
    #[arg(long)]
    katz: bool,
    #[arg(long, value_enum, default_value_t = OutputArg::Table)]
    output: OutputArg,
}

#[derive(Args)]
struct CentralityArgs {
    #[arg(long)]
    episode: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = OutputArg::Table)]
    output: OutputArg,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    episode: PathBuf,
    /// Transitions per trial.
    #[arg(long, default_value_t = 10_000)]
    steps: u64,
    #[arg(long, default_value_t = 10)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20.0)]
    gamma: f64,
    #[arg(long, default_value_t = 10.0)]
    beta: f64,
    #[arg(long, value_enum, default_value_t = OutputArg::Table)]
    output: OutputArg,
}

#[derive(Args)]
struct PoolArgs {
    #[arg(long)]
    episode: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = OutputArg::Table)]
    output: OutputArg,
}

#[derive(Args)]
struct BenchArgs {
    /// Feature counts r to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = vec![25, 64, 144])]
    resolutions: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    classes: usize,
    /// Query images per class per episode.
    #[arg(long, default_value_t = 15)]
    queries: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Timed episodes per row.
    #[arg(long, default_value_t = 30)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OutputArg::Table)]
    output: OutputArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenMode {
    /// Class-template features; well-mixed walk chains.
    Template,
    /// Independent unit-norm features.
    Uniform,
}

#[derive(Args)]
struct GenArgs {
    /// Number of classes.
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Shots per class.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Feature dimension.
    #[arg(long, default_value_t = 64)]
    d: usize,
    /// Local features per image.
    #[arg(long, default_value_t = 25)]
    r: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = GenMode::Template)]
    mode: GenMode,
    /// Template noise level (template mode only).
    #[arg(long, default_value_t = DEFAULT_TEMPLATE_SIGMA)]
    sigma: f64,
    #[arg(long, value_enum, default_value_t = FormatArg::Binary)]
    format: FormatArg,
    /// Output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Binary,
    Text,
}

/// Parses `argv` (including the program name) and runs one subcommand.
/// Returns the process exit code instead of exiting, so tests can drive it.
pub fn run<I>(args: I) -> i32
where
    I: IntoIterator<Item = String>,
{
    let _ = env_logger::try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err)
            if err.kind() == ErrorKind::DisplayHelp
                || err.kind() == ErrorKind::DisplayVersion =>
        {
            print!("{err}");
            return 0;
        }
        Err(err) => {
            let first_line = err.to_string();
            let first_line = first_line.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: usage error: {first_line}");
            return 1;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: usage error: {msg}");
            1
        }
        Err(CliError::Lib(err)) => {
            eprintln!("error: {err}");
            match err {
                Error::Parameter(_) => 1,
                Error::Convergence { .. } | Error::Numerical(_) => 3,
                _ => 2,
            }
        }
    }
}

enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        CliError::Lib(err)
    }
}

fn dispatch(command: Command) -> std::result::Result<(), CliError> {
    match command {
        Command::Classify(args) => cmd_classify(args),
        Command::Centrality(args) => cmd_centrality(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Pool(args) => cmd_pool(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Gen(args) => cmd_gen(args),
    }
}

#[derive(Serialize)]
struct ClassifyOutput<'a> {
    probs: &'a [f64],
    predicted: usize,
    method: &'a str,
    alpha: f64,
    gamma: f64,
    beta: f64,
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("output serializes")
    );
}

fn cmd_classify(args: ClassifyArgs) -> std::result::Result<(), CliError> {
    args.solver.validate().map_err(CliError::Usage)?;
    let episode = load_episode(&args.episode)?;
    let (dist, method, alpha): (ClassDistribution, &str, f64) = if args.katz {
        let alpha = args.solver.alpha.unwrap_or(DEFAULT_KATZ_ALPHA);
        (
            classify_katz(&episode, args.solver.gamma, args.solver.beta, alpha)?,
            "katz",
            alpha,
        )
    } else {
        let config = args.solver.config();
        let centrality = args.solver.centrality(&episode)?;
        let sums = class_block_sums(
            centrality.pi_s().as_slice().expect("contiguous"),
            episode.n_classes(),
        );
        (
            ClassDistribution::from_scores(sums)?,
            args.solver.method_name(),
            config.alpha,
        )
    };
    let predicted = dist.predict();
    match args.output {
        OutputArg::Json => print_json(&ClassifyOutput {
            probs: dist.probs(),
            predicted,
            method,
            alpha,
            gamma: args.solver.gamma,
            beta: args.solver.beta,
        }),
        OutputArg::Table => {
            println!("{:<6} {:>12}", "class", "probability");
            for (c, p) in dist.probs().iter().enumerate() {
                println!("{c:<6} {p:>12.6}");
            }
            println!("predicted: {predicted}");
        }
    }
    Ok(())
}

impl SolverArgs {
    fn method_name(&self) -> &'static str {
        match self.method {
            MethodArg::Eigen => "eigen",
            MethodArg::Power => "power",
            MethodArg::Linear => "linear",
            MethodArg::KatzClosed => "katz-closed",
            MethodArg::KatzBlock => "katz-block",
        }
    }
}

#[derive(Serialize)]
struct CentralityOutput<'a> {
    pi_s: &'a [f64],
    pi_q: &'a [f64],
    method: &'a str,
}

fn cmd_centrality(args: CentralityArgs) -> std::result::Result<(), CliError> {
    args.solver.validate().map_err(CliError::Usage)?;
    let episode = load_episode(&args.episode)?;
    let centrality = args.solver.centrality(&episode)?;
    match args.output {
        OutputArg::Json => print_json(&CentralityOutput {
            pi_s: centrality.pi_s().as_slice().expect("contiguous"),
            pi_q: centrality.pi_q().as_slice().expect("contiguous"),
            method: args.solver.method_name(),
        }),
        OutputArg::Table => {
            let r = episode.r();
            println!("{:<10} {:<8} {:>12}", "side", "feature", "centrality");
            for (i, v) in centrality.pi_s().iter().enumerate() {
                println!("s[{:<2}/{:<2}] {:>21.6}", i / r, i % r, v);
            }
            for (i, v) in centrality.pi_q().iter().enumerate() {
                println!("q[{i:<5}] {:>21.6}", v);
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateOutput {
    total_steps: u64,
    trials: u64,
    seed: u64,
    visits_support: Vec<u64>,
    visits_query: Vec<u64>,
    support_frequencies: Vec<f64>,
    class_distribution: Vec<f64>,
}

fn cmd_simulate(args: SimulateArgs) -> std::result::Result<(), CliError> {
    if !(args.gamma > 0.0) || !(args.beta > 0.0) {
        return Err(CliError::Usage(format!(
            "gamma and beta must be positive (got {} and {})",
            args.gamma, args.beta
        )));
    }
    if args.steps == 0 || args.trials == 0 {
        return Err(CliError::Usage(
            "steps and trials must be at least 1".into(),
        ));
    }
    let episode = load_episode(&args.episode)?;
    let pair = affinity::transition_pair(&episode, args.gamma, args.beta)?;
    let stats = simulate(&pair, args.steps, args.trials, args.seed)?;
    let dist = estimate_class_distribution(&stats, episode.n_classes())?;
    match args.output {
        OutputArg::Json => print_json(&SimulateOutput {
            total_steps: stats.total_steps,
            trials: stats.trials,
            seed: stats.rng_seed,
            support_frequencies: stats.support_frequencies(),
            class_distribution: dist.probs().to_vec(),
            visits_support: stats.visits_support,
            visits_query: stats.visits_query,
        }),
        OutputArg::Table => {
            println!(
                "walk: {} steps x {} trials, seed {}",
                stats.total_steps, stats.trials, stats.rng_seed
            );
            let freqs = stats.support_frequencies();
            println!("{:<10} {:>10} {:>12}", "state", "visits", "frequency");
            for (i, (&v, f)) in stats.visits_support.iter().zip(&freqs).enumerate() {
                println!("s[{i:<6}] {v:>11} {f:>12.6}");
            }
            for (i, &v) in stats.visits_query.iter().enumerate() {
                println!("q[{i:<6}] {v:>11}");
            }
            println!("class distribution: {:?}", dist.probs());
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct PoolOutput {
    query_vec: Vec<f64>,
    class_vecs: Vec<Vec<f64>>,
}

fn cmd_pool(args: PoolArgs) -> std::result::Result<(), CliError> {
    args.solver.validate().map_err(CliError::Usage)?;
    let episode = load_episode(&args.episode)?;
    let pooled = centrality_pool_episode(
        &episode,
        args.solver.gamma,
        args.solver.beta,
        &args.solver.config(),
    )?;
    match args.output {
        OutputArg::Json => print_json(&PoolOutput {
            query_vec: pooled.query_vec.to_vec(),
            class_vecs: pooled.class_vecs.iter().map(|v| v.to_vec()).collect(),
        }),
        OutputArg::Table => {
            println!("query: {:?}", pooled.query_vec.to_vec());
            for (c, v) in pooled.class_vecs.iter().enumerate() {
                println!("class {c}: {:?}", v.to_vec());
            }
        }
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> std::result::Result<(), CliError> {
    let config = BenchConfig {
        resolutions: args.resolutions,
        n_classes: args.classes,
        n_query: args.queries,
        d: args.dim,
        episodes: args.episodes,
        seed: args.seed,
    };
    let report = run_bench(&config)?;
    let format = match args.output {
        OutputArg::Json => ReportFormat::Json,
        OutputArg::Table => ReportFormat::Table,
    };
    print!("{}", emit_report(&report, format));
    Ok(())
}

fn cmd_gen(args: GenArgs) -> std::result::Result<(), CliError> {
    if args.n == 0 || args.k == 0 || args.d == 0 || args.r == 0 {
        return Err(CliError::Usage(
            "n, k, d and r must all be at least 1".into(),
        ));
    }
    if !(args.sigma >= 0.0) {
        return Err(CliError::Usage(format!(
            "sigma must be nonnegative, got {}",
            args.sigma
        )));
    }
    let (per_class_shots, query) = match args.mode {
        GenMode::Template => template_shots(args.n, args.k, args.d, args.r, args.sigma, args.seed),
        GenMode::Uniform => uniform_shots(args.n, args.k, args.d, args.r, args.seed),
    };
    let doc = EpisodeDocument { per_class_shots, query };
    let format = match args.format {
        FormatArg::Binary => EpisodeFormat::Binary,
        FormatArg::Text => EpisodeFormat::Text,
    };
    save_document(&doc, &args.out, format)?;
    println!(
        "wrote {} ({} classes, {} shots, {}x{} features)",
        args.out.display(),
        args.n,
        args.k,
        args.d,
        args.r
    );
    Ok(())
}
