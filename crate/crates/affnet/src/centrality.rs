//! Stationary-distribution and Katz-centrality solvers over a transition pair.
//!
//! Four interchangeable routes compute the same support-side centrality:
//!
//! * [`stationary_power`] — fixed-point iteration on the composed chain
//!   `p_sq * p_qs`. The raw bipartite matrix has period 2 and does not
//!   converge pointwise, so the iteration runs on the composed chain, which
//!   is strictly positive and hence primitive.
//! * [`stationary_linear`] — least squares on the stacked system
//!   `(p_sq * p_qs - I; 1^T) x = (0; 1)`. Reference path, kept for the
//!   solver shootout.
//! * [`katz_closed_form`] — `(I - alpha*P)^{-1} 1 - 1` on the dense assembly.
//! * [`katz_block_inverse`] — the same value computed by inverting only the
//!   `r x r` block `I - alpha^2 * p_qs * p_sq`, never materializing the
//!   `(Nr+r)^2` matrix.
//!
//! Katz centrality with `alpha` close to 1 approximates the eigenvector
//! centrality; [`eigen_approx`] packages that route.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Inverse, LeastSquaresSvd, Solve};

use crate::affinity::{assemble_dense, TransitionPair};
use crate::error::{Error, Result};

/// Attenuation factor used to approximate eigenvector centrality.
pub const DEFAULT_EIGEN_ALPHA: f64 = 0.999;
/// Attenuation factor for the plain Katz classification head.
pub const DEFAULT_KATZ_ALPHA: f64 = 0.5;
/// Default fixed-point tolerance for power iteration.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default iteration cap for power iteration.
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Single-mode stationary vectors: `pi_s` over the Nr support states and
/// `pi_q` over the r query states, each summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralityPair {
    pi_s: Array1<f64>,
    pi_q: Array1<f64>,
}

impl CentralityPair {
    pub fn pi_s(&self) -> &Array1<f64> {
        &self.pi_s
    }

    pub fn pi_q(&self) -> &Array1<f64> {
        &self.pi_q
    }
}

/// Which route computes the centrality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    PowerIteration,
    LinearSystem,
    KatzClosedForm,
    KatzBlockInverse,
}

impl SolverMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SolverMethod::PowerIteration => "power",
            SolverMethod::LinearSystem => "linear",
            SolverMethod::KatzClosedForm => "katz-closed",
            SolverMethod::KatzBlockInverse => "katz-block",
        }
    }
}

/// Solver selection plus its scalar knobs.
///
/// `alpha` only matters for the Katz routes, `tol`/`max_iter` only for power
/// iteration. The default is the production path: block-inverse Katz at
/// `alpha = 0.999`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::KatzBlockInverse,
            alpha: DEFAULT_EIGEN_ALPHA,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Unnormalized Katz (or eigenvector-approximating) scores over all
/// `Nr + r` states, support entries first.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCentrality {
    x: Array1<f64>,
    support_len: usize,
}

impl RawCentrality {
    pub fn new(x: Array1<f64>, support_len: usize) -> Result<Self> {
        if support_len == 0 || support_len >= x.len() {
            return Err(Error::Dimension(format!(
                "partition index {support_len} invalid for a score vector of length {}",
                x.len()
            )));
        }
        Ok(Self { x, support_len })
    }

    pub fn x(&self) -> &Array1<f64> {
        &self.x
    }

    pub fn support_len(&self) -> usize {
        self.support_len
    }

    /// Scores of the Nr support states.
    pub fn support_scores(&self) -> ndarray::ArrayView1<'_, f64> {
        self.x.slice(ndarray::s![..self.support_len])
    }

    /// Scores of the r query states.
    pub fn query_scores(&self) -> ndarray::ArrayView1<'_, f64> {
        self.x.slice(ndarray::s![self.support_len..])
    }
}

/// Fixed point of `v <- normalize(p_sq * (p_qs * v))` from a uniform start.
///
/// Converges when successive iterates differ by less than `tol` in max norm;
/// otherwise reports the final residual.
pub fn stationary_power(pair: &TransitionPair, tol: f64, max_iter: usize) -> Result<CentralityPair> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tol must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::Parameter("max_iter must be at least 1".into()));
    }
    let nr = pair.n_support();
    let mut v = Array1::from_elem(nr, 1.0 / nr as f64);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mut w = pair.p_sq().dot(&pair.p_qs().dot(&v));
        let sum = w.sum();
        w.mapv_inplace(|x| x / sum);
        residual = w
            .iter()
            .zip(v.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = w;
        if residual < tol {
            let pi_q = pair.p_qs().dot(&v);
            return Ok(CentralityPair { pi_s: v, pi_q });
        }
    }
    Err(Error::Convergence { iterations: max_iter, residual })
}

/// Solves the stacked least-squares system `(p_sq*p_qs - I; 1^T) x = (0; 1)`.
pub fn stationary_linear(pair: &TransitionPair) -> Result<CentralityPair> {
    let nr = pair.n_support();
    let composed = pair.p_sq().dot(pair.p_qs());
    let mut a = Array2::zeros((nr + 1, nr));
    for i in 0..nr {
        for j in 0..nr {
            a[[i, j]] = composed[[i, j]] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..nr {
        a[[nr, j]] = 1.0;
    }
    let mut b = Array1::zeros(nr + 1);
    b[nr] = 1.0;
    let lsq = a
        .least_squares(&b)
        .map_err(|e| Error::Numerical(format!("least squares failed: {e}")))?;
    if (lsq.rank as usize) < nr {
        return Err(Error::Numerical(format!(
            "stacked system is rank deficient ({} < {nr}); the chain's unit eigenspace is not one-dimensional",
            lsq.rank
        )));
    }
    let pi_s = lsq.solution;
    let sum_residual = (pi_s.sum() - 1.0).abs();
    if sum_residual > 1e-8 {
        return Err(Error::Numerical(format!(
            "stochastic constraint violated by {sum_residual:.3e}"
        )));
    }
    let pi_q = pair.p_qs().dot(&pi_s);
    Ok(CentralityPair { pi_s, pi_q })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::Parameter(format!(
            "attenuation factor must be in (0, 1), got {alpha}"
        )));
    }
    if alpha >= 1.0 {
        return Err(Error::Parameter(format!(
            "attenuation factor {alpha} >= 1: the walk series diverges"
        )));
    }
    if 1.0 - alpha < 1e-4 {
        log::warn!(
            "attenuation factor {alpha} is within 1e-4 of 1; the resolvent is ill-conditioned"
        );
    }
    Ok(())
}

/// Katz scores `(I - alpha*P)^{-1} 1 - 1` via an explicit dense inverse.
///
/// Reference route: it materializes the full `(Nr+r)^2` assembly. Equals the
/// attenuated walk series summed over all path lengths; every entry is
/// nonnegative.
pub fn katz_closed_form(pair: &TransitionPair, alpha: f64) -> Result<RawCentrality> {
    check_alpha(alpha)?;
    let n = pair.n_states();
    let dense = assemble_dense(pair);
    let mut a = dense.mapv(|v| -alpha * v);
    for i in 0..n {
        a[[i, i]] += 1.0;
    }
    let inv = a
        .inv()
        .map_err(|e| Error::Numerical(format!("resolvent inversion failed: {e}")))?;
    let ones = Array1::from_elem(n, 1.0);
    let x = inv.dot(&ones) - &ones;
    RawCentrality::new(x, pair.n_support())
}

/// Katz scores computed by factorizing only the `r x r` block
/// `I - alpha^2 * p_qs * p_sq`.
///
/// Writing `h = (I - alpha*P)^{-1} 1` blockwise gives
/// `h_q = (I - alpha^2 * p_qs * p_sq)^{-1} (1 + alpha * p_qs * 1)` and
/// `h_s = 1 + alpha * p_sq * h_q`, so the support scores are
/// `alpha * p_sq * h_q` and the query scores `h_q - 1`. Agrees with
/// [`katz_closed_form`] to solver precision while staying O(Nr r^2 + r^3).
pub fn katz_block_inverse(pair: &TransitionPair, alpha: f64) -> Result<RawCentrality> {
    check_alpha(alpha)?;
    let (nr, r) = (pair.n_support(), pair.n_query());
    let u = pair.p_qs().dot(&Array1::from_elem(nr, 1.0));
    let mut block = pair.p_qs().dot(pair.p_sq()).mapv(|v| -alpha * alpha * v);
    for i in 0..r {
        block[[i, i]] += 1.0;
    }
    let w = u.mapv(|v| 1.0 + alpha * v);
    let y = block
        .solve(&w)
        .map_err(|e| Error::Numerical(format!("block solve failed: {e}")))?;
    let x_s = pair.p_sq().dot(&y).mapv(|v| alpha * v);
    let x_q = y.mapv(|v| v - 1.0);
    let mut x = Array1::zeros(nr + r);
    x.slice_mut(ndarray::s![..nr]).assign(&x_s);
    x.slice_mut(ndarray::s![nr..]).assign(&x_q);
    RawCentrality::new(x, nr)
}

/// Restricts and renormalizes raw scores to each side of the partition.
pub fn single_mode_normalize(raw: &RawCentrality) -> Result<CentralityPair> {
    let s = raw.support_scores();
    let q = raw.query_scores();
    let s_sum = s.sum();
    let q_sum = q.sum();
    if !(s_sum > 0.0) {
        return Err(Error::Degenerate(format!(
            "support score slice sums to {s_sum}; cannot normalize"
        )));
    }
    if !(q_sum > 0.0) {
        return Err(Error::Degenerate(format!(
            "query score slice sums to {q_sum}; cannot normalize"
        )));
    }
    Ok(CentralityPair {
        pi_s: s.mapv(|v| v / s_sum),
        pi_q: q.mapv(|v| v / q_sum),
    })
}

/// Eigenvector-centrality approximation: block-inverse Katz at an `alpha`
/// close to 1, single-mode normalized. Requires `alpha` in `(0.9, 1)`.
pub fn eigen_approx(pair: &TransitionPair, alpha: f64) -> Result<CentralityPair> {
    if !(alpha > 0.9 && alpha < 1.0) {
        return Err(Error::Parameter(format!(
            "eigenvector approximation needs alpha in (0.9, 1), got {alpha}"
        )));
    }
    single_mode_normalize(&katz_block_inverse(pair, alpha)?)
}

/// Runs the route selected by `config` and returns single-mode centralities.
pub fn solve(pair: &TransitionPair, config: &SolverConfig) -> Result<CentralityPair> {
    match config.method {
        SolverMethod::PowerIteration => stationary_power(pair, config.tol, config.max_iter),
        SolverMethod::LinearSystem => stationary_linear(pair),
        SolverMethod::KatzClosedForm => {
            single_mode_normalize(&katz_closed_form(pair, config.alpha)?)
        }
        SolverMethod::KatzBlockInverse => {
            single_mode_normalize(&katz_block_inverse(pair, config.alpha)?)
        }
    }
}
