//! Cosine affinities and the column-stochastic transition blocks.
//!
//! The affinity matrix compares every query feature against every support
//! feature; scaled column softmax turns it into the two transition blocks of
//! the bipartite walk. The walk only ever crosses sides, so the full
//! transition matrix is anti-block-diagonal and is stored as the pair of
//! blocks; [`assemble_dense`] materializes it for reference solvers and
//! structural tests only.

use ndarray::{Array2, Axis};

use crate::episode::FeatureMatrix;
use crate::error::{Error, Result};

/// Vectors with norm below this are treated as zero for cosine purposes.
const NORM_EPS: f64 = 1e-12;

/// Cosine similarities between query features (rows) and support features
/// (columns): an `r x Nr` matrix with entries in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    data: Array2<f64>,
}

impl AffinityMatrix {
    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    /// Number of query features (rows).
    pub fn n_query(&self) -> usize {
        self.data.nrows()
    }

    /// Number of support features (columns).
    pub fn n_support(&self) -> usize {
        self.data.ncols()
    }
}

/// Computes the cosine affinity matrix between a query set and the support
/// union.
///
/// A vector with norm below `1e-12` has cosine 0 against every partner; this
/// keeps degenerate synthetic inputs flowing instead of erroring, and the
/// softmax of the resulting row is still well defined.
pub fn cosine_affinity(
    query: &FeatureMatrix,
    support_union: &FeatureMatrix,
) -> Result<AffinityMatrix> {
    if query.d() != support_union.d() {
        return Err(Error::Dimension(format!(
            "query features have dimension {}, support features {}",
            query.d(),
            support_union.d()
        )));
    }
    let qn = normalized_columns(query);
    let sn = normalized_columns(support_union);
    let data = qn.t().dot(&sn);
    Ok(AffinityMatrix { data })
}

fn normalized_columns(m: &FeatureMatrix) -> Array2<f64> {
    let mut out = m.data().clone();
    for mut col in out.columns_mut() {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < NORM_EPS {
            col.fill(0.0);
        } else {
            col.mapv_inplace(|v| v / norm);
        }
    }
    out
}

/// Column-wise softmax of `scale * matrix`, computed with per-column max
/// subtraction so large scales do not overflow. Every column of the result
/// sums to 1 and every entry is strictly positive.
pub fn column_softmax(matrix: &Array2<f64>, scale: f64) -> Array2<f64> {
    let mut out = matrix.mapv(|v| scale * v);
    for mut col in out.columns_mut() {
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        col.mapv_inplace(|v| (v - max).exp());
        let sum = col.sum();
        col.mapv_inplace(|v| v / sum);
    }
    out
}

/// The two column-stochastic blocks of the bipartite transition matrix.
///
/// `p_sq` (`Nr x r`) moves a particle from a query feature to a support
/// feature; `p_qs` (`r x Nr`) moves it back. Both have strictly positive
/// entries and unit column sums by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionPair {
    p_sq: Array2<f64>,
    p_qs: Array2<f64>,
    gamma: f64,
    beta: f64,
}

impl TransitionPair {
    /// Query-to-support block, `Nr x r`.
    pub fn p_sq(&self) -> &Array2<f64> {
        &self.p_sq
    }

    /// Support-to-query block, `r x Nr`.
    pub fn p_qs(&self) -> &Array2<f64> {
        &self.p_qs
    }

    /// Number of support states Nr.
    pub fn n_support(&self) -> usize {
        self.p_sq.nrows()
    }

    /// Number of query states r.
    pub fn n_query(&self) -> usize {
        self.p_sq.ncols()
    }

    /// Total number of walk states, Nr + r.
    pub fn n_states(&self) -> usize {
        self.n_support() + self.n_query()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Builds the transition pair from an affinity matrix.
///
/// `gamma` scales the query-to-support softmax, `beta` the support-to-query
/// one; both must be strictly positive. The two sides use different scales
/// because the affinity matrix is non-square.
pub fn build_transitions(phi: &AffinityMatrix, gamma: f64, beta: f64) -> Result<TransitionPair> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Parameter(format!(
            "gamma must be positive and finite, got {gamma}"
        )));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Parameter(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    let p_sq = column_softmax(&phi.data().t().to_owned(), gamma);
    let p_qs = column_softmax(phi.data(), beta);
    Ok(TransitionPair { p_sq, p_qs, gamma, beta })
}

/// Convenience pipeline: affinity matrix and transition pair straight from
/// an episode.
pub fn transition_pair(
    episode: &crate::episode::Episode,
    gamma: f64,
    beta: f64,
) -> Result<TransitionPair> {
    let support = crate::episode::flatten_support(episode);
    let phi = cosine_affinity(episode.query(), &support)?;
    build_transitions(&phi, gamma, beta)
}

/// Materializes the full `(Nr+r) x (Nr+r)` transition matrix with support
/// states first, then query states. The diagonal blocks are zero; columns
/// sum to 1.
pub fn assemble_dense(pair: &TransitionPair) -> Array2<f64> {
    let (nr, r) = (pair.n_support(), pair.n_query());
    let mut dense = Array2::zeros((nr + r, nr + r));
    dense.slice_mut(ndarray::s![..nr, nr..]).assign(&pair.p_sq);
    dense.slice_mut(ndarray::s![nr.., ..nr]).assign(&pair.p_qs);
    dense
}

/// Max deviation of any column sum from 1; used by tests and the solvers'
/// internal sanity checks.
pub fn max_column_sum_error(m: &Array2<f64>) -> f64 {
    m.sum_axis(Axis(0))
        .iter()
        .map(|s| (s - 1.0).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::{flatten_support, Episode};
    use ndarray::array;

    fn fm(data: Array2<f64>) -> FeatureMatrix {
        FeatureMatrix::new(data).unwrap()
    }

    #[test]
    fn cosine_identical_and_orthogonal() {
        let q = fm(array![[1.0, 0.0], [0.0, 1.0]]);
        let s = fm(array![[1.0, 0.0], [0.0, 1.0]]);
        let phi = cosine_affinity(&q, &s).unwrap();
        assert!((phi.data()[[0, 0]] - 1.0).abs() < 1e-15);
        assert!(phi.data()[[0, 1]].abs() < 1e-15);
    }

    #[test]
    fn cosine_hand_computed() {
        let q = fm(array![[1.0], [1.0]]);
        let s = fm(array![[1.0], [0.0]]);
        let phi = cosine_affinity(&q, &s).unwrap();
        assert!((phi.data()[[0, 0]] - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cosine_zero_norm_convention() {
        let q = fm(array![[0.0], [0.0]]);
        let s = fm(array![[1.0], [0.0]]);
        let phi = cosine_affinity(&q, &s).unwrap();
        assert_eq!(phi.data()[[0, 0]], 0.0);
    }

    #[test]
    fn cosine_dimension_mismatch() {
        let q = fm(array![[1.0], [0.0]]);
        let s = fm(array![[1.0]]);
        assert!(matches!(
            cosine_affinity(&q, &s),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn softmax_uniform_on_equal_entries() {
        let m = array![[3.0, -1.0], [3.0, -1.0], [3.0, -1.0]];
        let sm = column_softmax(&m, 7.0);
        for v in sm.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_two_row_logistic() {
        let m = array![[1.0], [0.0]];
        let sm = column_softmax(&m, 1.0);
        let e = std::f64::consts::E;
        assert!((sm[[0, 0]] - e / (e + 1.0)).abs() < 1e-12);
        assert!((sm[[1, 0]] - 1.0 / (e + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn softmax_large_scale_approaches_one_hot() {
        let m = array![[0.3], [0.1], [0.9]];
        let sm = column_softmax(&m, 1e3);
        assert!((sm[[2, 0]] - 1.0).abs() < 1e-6);
        assert!(sm[[0, 0]] < 1e-6 && sm[[1, 0]] < 1e-6);
    }

    #[test]
    fn transitions_uniform_for_zero_affinity() {
        let q = fm(array![[0.0, 0.0], [0.0, 0.0]]);
        let s = fm(array![[0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]]);
        let phi = cosine_affinity(&q, &s).unwrap();
        let pair = build_transitions(&phi, 20.0, 10.0).unwrap();
        for v in pair.p_sq().iter() {
            assert!((v - 0.25).abs() < 1e-15);
        }
        for v in pair.p_qs().iter() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn transitions_are_column_stochastic_and_positive() {
        let q = fm(array![[1.0, 0.2], [0.1, 0.9]]);
        let s = fm(array![[0.8, 0.3, -0.5, 0.0], [0.2, -0.7, 0.5, 1.0]]);
        let phi = cosine_affinity(&q, &s).unwrap();
        let pair = build_transitions(&phi, 20.0, 10.0).unwrap();
        assert!(max_column_sum_error(pair.p_sq()) < 1e-9);
        assert!(max_column_sum_error(pair.p_qs()) < 1e-9);
        assert!(pair.p_sq().iter().all(|&v| v > 0.0));
        assert!(pair.p_qs().iter().all(|&v| v > 0.0));
        // composition is still column-stochastic
        let composed = pair.p_sq().dot(pair.p_qs());
        assert!(max_column_sum_error(&composed) < 1e-9);
    }

    #[test]
    fn transitions_reject_bad_scales() {
        let q = fm(array![[1.0]]);
        let phi = cosine_affinity(&q, &q).unwrap();
        assert!(matches!(
            build_transitions(&phi, 0.0, 10.0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            build_transitions(&phi, 20.0, -1.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn dense_single_feature_chain() {
        let m = fm(array![[1.0]]);
        let ep = Episode::new(vec![m.clone()], m).unwrap();
        let phi = cosine_affinity(ep.query(), &flatten_support(&ep)).unwrap();
        let pair = build_transitions(&phi, 20.0, 10.0).unwrap();
        let dense = assemble_dense(&pair);
        assert_eq!(dense, array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn dense_structure_and_column_sums() {
        let q = fm(array![[1.0, 0.2], [0.1, 0.9]]);
        let s = fm(array![[0.8, 0.3, -0.5, 0.0], [0.2, -0.7, 0.5, 1.0]]);
        let phi = cosine_affinity(&q, &s).unwrap();
        let pair = build_transitions(&phi, 5.0, 5.0).unwrap();
        let dense = assemble_dense(&pair);
        assert!(max_column_sum_error(&dense) < 1e-9);
        // top-left Nr x Nr block is identically zero
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(dense[[i, j]], 0.0);
            }
        }
        for i in 4..6 {
            for j in 4..6 {
                assert_eq!(dense[[i, j]], 0.0);
            }
        }
    }
}
