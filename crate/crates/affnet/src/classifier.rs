//! Classification heads: class probabilities from support-side centralities.
//!
//! A class's score is the total centrality mass on its block of support
//! features (class-major layout, so block `c` is `[c*r, (c+1)*r)`).
//! [`classify_eigen`] scores with the stationary/eigenvector centrality
//! through any configured solver; [`classify_katz`] scores with attenuated
//! Katz accessibility at a free `alpha`.

use crate::affinity::transition_pair;
use crate::centrality::{katz_block_inverse, solve, SolverConfig};
use crate::episode::Episode;
use crate::error::{Error, Result};

/// A probability vector over the N support classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    probs: Vec<f64>,
}

impl ClassDistribution {
    /// Normalizes per-class scores into a distribution.
    pub fn from_scores(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyInput("no class scores".into()));
        }
        if scores.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation(
                "class scores must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = scores.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Degenerate("class scores sum to zero".into()));
        }
        Ok(Self {
            probs: scores.into_iter().map(|v| v / total).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_classes(&self) -> usize {
        self.probs.len()
    }

    /// Argmax class; ties break toward the lowest index.
    pub fn predict(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Sums a support-side score vector over contiguous class blocks of width `r`.
pub(crate) fn class_block_sums(scores: &[f64], n_classes: usize) -> Vec<f64> {
    let r = scores.len() / n_classes;
    (0..n_classes)
        .map(|c| scores[c * r..(c + 1) * r].iter().sum())
        .collect()
}

/// Class probabilities from the stationary (eigenvector) centrality: the
/// probability of class `c` is the stationary mass on its support block.
pub fn classify_eigen(
    episode: &Episode,
    gamma: f64,
    beta: f64,
    solver: &SolverConfig,
) -> Result<ClassDistribution> {
    let pair = transition_pair(episode, gamma, beta)?;
    let centrality = solve(&pair, solver)?;
    let sums = class_block_sums(
        centrality.pi_s().as_slice().expect("contiguous"),
        episode.n_classes(),
    );
    ClassDistribution::from_scores(sums)
}

/// Class probabilities from Katz accessibility: class `c` scores the total
/// attenuated-walk mass on its block, normalized over all support entries.
pub fn classify_katz(
    episode: &Episode,
    gamma: f64,
    beta: f64,
    alpha: f64,
) -> Result<ClassDistribution> {
    let pair = transition_pair(episode, gamma, beta)?;
    let raw = katz_block_inverse(&pair, alpha)?;
    let support: Vec<f64> = raw.support_scores().to_vec();
    let sums = class_block_sums(&support, episode.n_classes());
    ClassDistribution::from_scores(sums)
}
