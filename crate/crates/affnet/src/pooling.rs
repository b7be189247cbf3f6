//! Centrality-weighted pooling: convex combinations of local features in
//! place of global average pooling.
//!
//! Query features pool with the query-side centrality directly (it already
//! sums to 1); support features pool per class after renormalizing the
//! support-side centrality within each class block.

use ndarray::Array1;

use crate::affinity::transition_pair;
use crate::centrality::{solve, SolverConfig};
use crate::episode::{flatten_support, Episode, FeatureMatrix};
use crate::error::{Error, Result};

/// Pooled vectors: one for the query image, one per support class.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledFeatures {
    pub query_vec: Array1<f64>,
    pub class_vecs: Vec<Array1<f64>>,
}

/// Weighted accumulation of query columns: `sum_j pi_q[j] * q_j`.
pub fn pool_query(query: &FeatureMatrix, pi_q: &Array1<f64>) -> Result<Array1<f64>> {
    if pi_q.len() != query.r() {
        return Err(Error::Dimension(format!(
            "{} weights for {} query features",
            pi_q.len(),
            query.r()
        )));
    }
    Ok(query.data().dot(pi_q))
}

/// Per-class weighted accumulation of support columns.
///
/// Within each class block of `pi_s` the weights are renormalized to sum to
/// 1, so every class vector is a convex combination of that class's features
/// regardless of how much total mass the class holds.
pub fn pool_support(
    support_union: &FeatureMatrix,
    pi_s: &Array1<f64>,
    n_classes: usize,
) -> Result<Vec<Array1<f64>>> {
    if n_classes == 0 || pi_s.len() != support_union.r() || pi_s.len() % n_classes != 0 {
        return Err(Error::Dimension(format!(
            "{} weights for {} support features in {n_classes} classes",
            pi_s.len(),
            support_union.r()
        )));
    }
    let r = pi_s.len() / n_classes;
    let mut out = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let block = pi_s.slice(ndarray::s![c * r..(c + 1) * r]);
        let mass = block.sum();
        if !(mass > 0.0) {
            return Err(Error::Degenerate(format!(
                "class {c} has zero centrality mass"
            )));
        }
        let weights = block.mapv(|v| v / mass);
        let cols = support_union
            .data()
            .slice(ndarray::s![.., c * r..(c + 1) * r]);
        out.push(cols.dot(&weights));
    }
    Ok(out)
}

/// Plain column mean; the baseline the centrality weighting replaces.
pub fn global_average_pool(features: &FeatureMatrix) -> Array1<f64> {
    let uniform = Array1::from_elem(features.r(), 1.0 / features.r() as f64);
    features.data().dot(&uniform)
}

/// Full pipeline: affinities, centralities through the configured solver,
/// then weighted pooling on both sides.
pub fn centrality_pool_episode(
    episode: &Episode,
    gamma: f64,
    beta: f64,
    solver: &SolverConfig,
) -> Result<PooledFeatures> {
    let pair = transition_pair(episode, gamma, beta)?;
    let centrality = solve(&pair, solver)?;
    let query_vec = pool_query(episode.query(), centrality.pi_q())?;
    let class_vecs = pool_support(
        &flatten_support(episode),
        centrality.pi_s(),
        episode.n_classes(),
    )?;
    Ok(PooledFeatures { query_vec, class_vecs })
}
