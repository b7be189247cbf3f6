//! Seeded Monte Carlo simulation of the bipartite walk.
//!
//! This module is the crate's independent oracle: it executes the walk one
//! transition at a time, exactly as the process is defined, and estimates
//! visit statistics that the closed-form solvers must reproduce.
//!
//! Reproducibility contract: the generator is ChaCha8 keyed by the 64-bit
//! seed, and trial `i` draws from stream `i` of that key (ChaCha's stream
//! counter), so results are bit-identical for a given
//! `(seed, steps, trials)` regardless of how trials are scheduled across
//! threads. Counts aggregate by integer addition, which is order-independent.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::affinity::TransitionPair;
use crate::classifier::{class_block_sums, ClassDistribution};
use crate::error::{Error, Result};

/// Visit counts collected over all trials of a simulation.
///
/// `total_steps` is the number of transitions per trial, so
/// `sum(visits_support) + sum(visits_query) == total_steps * trials`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkStats {
    pub visits_support: Vec<u64>,
    pub visits_query: Vec<u64>,
    pub total_steps: u64,
    pub trials: u64,
    pub rng_seed: u64,
}

impl WalkStats {
    /// Support visit frequencies normalized over support visits only; the
    /// empirical counterpart of the stationary support distribution.
    pub fn support_frequencies(&self) -> Vec<f64> {
        let total: u64 = self.visits_support.iter().sum();
        self.visits_support
            .iter()
            .map(|&v| v as f64 / total as f64)
            .collect()
    }

    /// Query-side frequencies, normalized over query visits.
    pub fn query_frequencies(&self) -> Vec<f64> {
        let total: u64 = self.visits_query.iter().sum();
        self.visits_query
            .iter()
            .map(|&v| v as f64 / total as f64)
            .collect()
    }
}

/// Inverse-CDF sampler over the columns of a stochastic matrix; cumulative
/// sums are precomputed once per matrix.
struct ColumnSampler {
    rows: usize,
    cums: Vec<f64>, // column-major concatenation of cumulative sums
}

impl ColumnSampler {
    fn new(m: &Array2<f64>) -> Self {
        let (rows, cols) = m.dim();
        let mut cums = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            let mut acc = 0.0;
            for i in 0..rows {
                acc += m[[i, j]];
                cums.push(acc);
            }
        }
        Self { rows, cums }
    }

    fn sample(&self, col: usize, u: f64) -> usize {
        let slice = &self.cums[col * self.rows..(col + 1) * self.rows];
        let idx = slice.partition_point(|&c| c <= u);
        idx.min(self.rows - 1)
    }
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Simulates `trials` independent walks of `steps` transitions each.
///
/// Each trial starts uniformly over all `Nr + r` states; a particle on a
/// query state samples a support state from the matching column of `p_sq`,
/// and vice versa. Visits are counted from the first transition on (the
/// start state is not counted).
pub fn simulate(pair: &TransitionPair, steps: u64, trials: u64, seed: u64) -> Result<WalkStats> {
    if steps == 0 || trials == 0 {
        return Err(Error::Parameter(
            "simulation needs at least one step and one trial".into(),
        ));
    }
    let (nr, r) = (pair.n_support(), pair.n_query());
    let to_support = ColumnSampler::new(pair.p_sq());
    let to_query = ColumnSampler::new(pair.p_qs());

    let (visits_support, visits_query) = (0..trials)
        .into_par_iter()
        .fold(
            || (vec![0u64; nr], vec![0u64; r]),
            |(mut vs, mut vq), trial| {
                let mut rng = trial_rng(seed, trial);
                let mut state = rng.random_range(0..nr + r);
                for _ in 0..steps {
                    state = if state < nr {
                        // support -> query; p_qs column is the support index
                        nr + to_query.sample(state, rng.random::<f64>())
                    } else {
                        // query -> support; p_sq column is the query index
                        to_support.sample(state - nr, rng.random::<f64>())
                    };
                    if state < nr {
                        vs[state] += 1;
                    } else {
                        vq[state - nr] += 1;
                    }
                }
                (vs, vq)
            },
        )
        .reduce(
            || (vec![0u64; nr], vec![0u64; r]),
            |(mut asup, mut aq), (bsup, bq)| {
                for (a, b) in asup.iter_mut().zip(&bsup) {
                    *a += b;
                }
                for (a, b) in aq.iter_mut().zip(&bq) {
                    *a += b;
                }
                (asup, aq)
            },
        );

    Ok(WalkStats {
        visits_support,
        visits_query,
        total_steps: steps,
        trials,
        rng_seed: seed,
    })
}

/// Records the state sequence of a single walk, start state first.
/// Instrumentation for tests that check the walk never stays on one side.
pub fn walk_trace(pair: &TransitionPair, steps: u64, seed: u64) -> Vec<usize> {
    let (nr, r) = (pair.n_support(), pair.n_query());
    let to_support = ColumnSampler::new(pair.p_sq());
    let to_query = ColumnSampler::new(pair.p_qs());
    let mut rng = trial_rng(seed, 0);
    let mut state = rng.random_range(0..nr + r);
    let mut trace = Vec::with_capacity(steps as usize + 1);
    trace.push(state);
    for _ in 0..steps {
        state = if state < nr {
            nr + to_query.sample(state, rng.random::<f64>())
        } else {
            to_support.sample(state - nr, rng.random::<f64>())
        };
        trace.push(state);
    }
    trace
}

/// Class distribution from simulated support visits: the share of support
/// visits landing in each class block.
pub fn estimate_class_distribution(
    stats: &WalkStats,
    n_classes: usize,
) -> Result<ClassDistribution> {
    if n_classes == 0 || stats.visits_support.len() % n_classes != 0 {
        return Err(Error::Dimension(format!(
            "{} support states do not split into {n_classes} classes",
            stats.visits_support.len()
        )));
    }
    let total: u64 = stats.visits_support.iter().sum();
    if total == 0 {
        return Err(Error::Degenerate(
            "no support visits recorded; walk too short".into(),
        ));
    }
    let counts: Vec<f64> = stats.visits_support.iter().map(|&v| v as f64).collect();
    ClassDistribution::from_scores(class_block_sums(&counts, n_classes))
}

/// Monte Carlo estimate of the attenuated (Katz) accessibility per class:
/// visits at step `t` count with weight `alpha^t`, accumulated up to
/// `horizon` and normalized over classes.
///
/// The horizon should satisfy `alpha^horizon / (1 - alpha) < 1e-4` so the
/// discarded tail is negligible against statistical noise.
pub fn estimate_katz_accessibility(
    pair: &TransitionPair,
    alpha: f64,
    horizon: u64,
    trials: u64,
    seed: u64,
) -> Result<ClassDistribution> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!(
            "attenuation factor must be in (0, 1), got {alpha}"
        )));
    }
    if horizon == 0 || trials == 0 {
        return Err(Error::Parameter(
            "estimation needs at least one step and one trial".into(),
        ));
    }
    let (nr, r) = (pair.n_support(), pair.n_query());
    if r == 0 || nr % r != 0 {
        return Err(Error::Dimension(format!(
            "{nr} support states do not split into blocks of {r}"
        )));
    }
    let n_classes = nr / r;
    let to_support = ColumnSampler::new(pair.p_sq());
    let to_query = ColumnSampler::new(pair.p_qs());

    // per-trial class masses are collected and summed in trial order so the
    // floating-point reduction is reproducible
    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let mut state = rng.random_range(0..nr + r);
            let mut weight = 1.0;
            let mut acc = vec![0.0; n_classes];
            for _ in 0..horizon {
                state = if state < nr {
                    nr + to_query.sample(state, rng.random::<f64>())
                } else {
                    to_support.sample(state - nr, rng.random::<f64>())
                };
                weight *= alpha;
                if state < nr {
                    acc[state / r] += weight;
                }
            }
            acc
        })
        .collect();

    let mut totals = vec![0.0; n_classes];
    for trial in per_trial {
        for (t, v) in totals.iter_mut().zip(trial) {
            *t += v;
        }
    }
    ClassDistribution::from_scores(totals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affinity::{build_transitions, cosine_affinity};
    use crate::episode::FeatureMatrix;
    use ndarray::{array, Array2};

    fn pair_from(q: Array2<f64>, s: Array2<f64>, gamma: f64, beta: f64) -> TransitionPair {
        let q = FeatureMatrix::new(q).unwrap();
        let s = FeatureMatrix::new(s).unwrap();
        let phi = cosine_affinity(&q, &s).unwrap();
        build_transitions(&phi, gamma, beta).unwrap()
    }

    fn uniform_pair(nr: usize, r: usize) -> TransitionPair {
        pair_from(Array2::zeros((2, r)), Array2::zeros((2, nr)), 20.0, 10.0)
    }

    #[test]
    fn two_state_chain_alternates() {
        let pair = pair_from(array![[1.0]], array![[1.0]], 20.0, 10.0);
        for steps in [5u64, 6] {
            for seed in 0..4 {
                let stats = simulate(&pair, steps, 1, seed).unwrap();
                let sup = stats.visits_support[0];
                // forced alternation: ceil or floor of steps/2 depending on start
                assert!(sup == steps / 2 || sup == steps.div_ceil(2), "sup={sup}");
                assert_eq!(sup + stats.visits_query[0], steps);
            }
        }
    }

    #[test]
    fn visit_counts_add_up() {
        let pair = uniform_pair(4, 2);
        let stats = simulate(&pair, 137, 11, 3).unwrap();
        let total: u64 =
            stats.visits_support.iter().sum::<u64>() + stats.visits_query.iter().sum::<u64>();
        assert_eq!(total, 137 * 11);
    }

    #[test]
    fn identical_seeds_reproduce_bit_exactly() {
        let pair = uniform_pair(6, 3);
        let a = simulate(&pair, 500, 8, 42).unwrap();
        let b = simulate(&pair, 500, 8, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate(&pair, 500, 8, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_pair_visits_are_uniform() {
        let pair = uniform_pair(4, 2);
        let stats = simulate(&pair, 1000, 100, 7).unwrap();
        // 3-sigma binomial bounds at 1e5 total steps: support visits split
        // roughly evenly between the 4 states
        let freqs = stats.support_frequencies();
        let sigma = (0.25 * 0.75 / 50_000.0_f64).sqrt();
        for f in freqs {
            assert!((f - 0.25).abs() < 3.0 * sigma, "freq {f}");
        }
    }

    #[test]
    fn traces_always_alternate_sides() {
        let q = array![[1.0, 0.2], [0.1, 0.9]];
        let s = array![[0.8, 0.3, -0.5, 0.0], [0.2, -0.7, 0.5, 1.0]];
        let pair = pair_from(q, s, 20.0, 10.0);
        let nr = pair.n_support();
        let trace = walk_trace(&pair, 400, 5);
        for w in trace.windows(2) {
            let (a, b) = (w[0] < nr, w[1] < nr);
            assert_ne!(a, b, "walk stayed on one side: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn class_distribution_from_counts() {
        let stats = WalkStats {
            visits_support: vec![10, 0, 0, 0],
            visits_query: vec![5, 5],
            total_steps: 10,
            trials: 2,
            rng_seed: 0,
        };
        let dist = estimate_class_distribution(&stats, 2).unwrap();
        assert_eq!(dist.probs(), &[1.0, 0.0]);

        let stats = WalkStats {
            visits_support: vec![5, 5, 5, 5],
            visits_query: vec![0, 0],
            total_steps: 10,
            trials: 2,
            rng_seed: 0,
        };
        let dist = estimate_class_distribution(&stats, 2).unwrap();
        assert_eq!(dist.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn zero_support_visits_is_degenerate() {
        let stats = WalkStats {
            visits_support: vec![0, 0],
            visits_query: vec![1, 1],
            total_steps: 1,
            trials: 2,
            rng_seed: 0,
        };
        assert!(matches!(
            estimate_class_distribution(&stats, 2),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn katz_estimate_uniform_pair_is_uniform() {
        let pair = uniform_pair(4, 2);
        let dist = estimate_katz_accessibility(&pair, 0.5, 32, 4000, 11).unwrap();
        for p in dist.probs() {
            assert!((p - 0.5).abs() < 0.05, "prob {p}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let pair = uniform_pair(4, 2);
        assert!(matches!(
            simulate(&pair, 0, 5, 1),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            simulate(&pair, 5, 0, 1),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            estimate_katz_accessibility(&pair, 1.2, 10, 10, 1),
            Err(Error::Parameter(_))
        ));
    }
}
