//! Bipartite random-walk centrality for dense-feature episodes.
//!
//! Query and support images are represented by sets of local feature vectors.
//! Linking the two sets by cosine affinities yields an affiliation network on
//! which a particle walks strictly back and forth; the stationary mass a
//! support feature accumulates measures how strongly it is mutually tied to
//! the query. Summing that mass per class scores an N-way classification, and
//! the same centralities weight local features for pooling.
//!
//! The crate provides:
//!
//! * [`episode`] — feature matrices, K-shot prototype averaging, episodes;
//! * [`affinity`] — cosine affinities and the column-stochastic walk blocks;
//! * [`centrality`] — stationary and Katz centralities via four solvers;
//! * [`classifier`] — class distributions and predictions;
//! * [`walker`] — a seeded Monte Carlo simulator used as an independent
//!   correctness oracle;
//! * [`pooling`] — centrality-weighted feature pooling;
//! * [`bench`] — a timing harness comparing the solvers;
//! * [`synth`] — seeded synthetic episode generators;
//! * [`io`] — versioned episode files (text and binary);
//! * [`cli`] — the `affnet` command-line entry point.
//!
//! Runnable examples live under `examples/`, one per capability.

pub mod affinity;
pub mod bench;
pub mod centrality;
pub mod classifier;
pub mod cli;
pub mod episode;
pub mod error;
pub mod io;
pub mod pooling;
pub mod synth;
pub mod walker;

pub use affinity::{
    assemble_dense, build_transitions, column_softmax, cosine_affinity, transition_pair,
    AffinityMatrix, TransitionPair,
};
pub use centrality::{
    eigen_approx, katz_block_inverse, katz_closed_form, single_mode_normalize, solve,
    stationary_linear, stationary_power, CentralityPair, RawCentrality, SolverConfig,
    SolverMethod, DEFAULT_EIGEN_ALPHA, DEFAULT_KATZ_ALPHA, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
pub use bench::{emit_report, run_bench, BenchConfig, BenchReport, BenchRow, ReportFormat};
pub use classifier::{classify_eigen, classify_katz, ClassDistribution};
pub use episode::{average_prototype, build_episode, flatten_support, Episode, FeatureMatrix};
pub use error::{Error, Result};
pub use io::{load_episode, save_episode, EpisodeDocument, EpisodeFormat};
pub use pooling::{
    centrality_pool_episode, global_average_pool, pool_query, pool_support, PooledFeatures,
};
pub use walker::{
    estimate_class_distribution, estimate_katz_accessibility, simulate, walk_trace, WalkStats,
};

/// Softmax scale pair for the two walk directions.
///
/// The query-to-support side uses the larger `gamma` because it targets the
/// larger feature set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scales {
    pub gamma: f64,
    pub beta: f64,
}

impl Scales {
    /// Scales tuned for 1-shot episodes: gamma 20, beta 10.
    pub fn one_shot() -> Self {
        Self { gamma: 20.0, beta: 10.0 }
    }

    /// Scales tuned for 5-shot episodes: gamma 40, beta 20.
    pub fn five_shot() -> Self {
        Self { gamma: 40.0, beta: 20.0 }
    }

    /// Picks the scale pair matching the shot count (5 or more shots use the
    /// 5-shot pair).
    pub fn for_shots(k: usize) -> Self {
        if k >= 5 {
            Self::five_shot()
        } else {
            Self::one_shot()
        }
    }
}

impl Default for Scales {
    fn default() -> Self {
        Self::one_shot()
    }
}
