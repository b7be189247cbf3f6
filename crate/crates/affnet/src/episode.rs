//! Dense feature sets and episode construction.
//!
//! An image (or class prototype) is represented by a `d x r` matrix whose
//! columns are r local feature vectors of dimension d. An [`Episode`] bundles
//! one prototype per support class together with a query feature set; all
//! matrices in an episode share the same shape.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// A dense feature block: column `j` is local feature `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Array2<f64>,
}

impl FeatureMatrix {
    /// Wraps a `d x r` matrix. Requires `d >= 1`, `r >= 1` and finite entries.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (d, r) = data.dim();
        if d == 0 || r == 0 {
            return Err(Error::Dimension(format!(
                "feature matrix must be at least 1x1, got {d}x{r}"
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::Validation(
                "feature matrix contains non-finite entries".into(),
            ));
        }
        Ok(Self { data })
    }

    /// Builds a matrix from feature columns (each of length `d`).
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::EmptyInput("no feature columns".into()));
        }
        let d = columns[0].len();
        if columns.iter().any(|c| c.len() != d) {
            return Err(Error::Dimension("feature columns differ in length".into()));
        }
        let r = columns.len();
        let mut data = Array2::zeros((d, r));
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                data[[i, j]] = v;
            }
        }
        Self::new(data)
    }

    /// Feature dimension d.
    pub fn d(&self) -> usize {
        self.data.nrows()
    }

    /// Number of local features r.
    pub fn r(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    /// Local feature `j` as a column view.
    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.data.column(j)
    }
}

/// An N-way task: one averaged prototype per class plus one query feature set.
///
/// Class order is stable; class `c` is `supports()[c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    supports: Vec<FeatureMatrix>,
    query: FeatureMatrix,
}

impl Episode {
    /// Assembles an episode from per-class prototypes and a query set.
    /// All matrices must share the same `(d, r)`.
    pub fn new(supports: Vec<FeatureMatrix>, query: FeatureMatrix) -> Result<Self> {
        if supports.is_empty() {
            return Err(Error::EmptyInput("episode needs at least one class".into()));
        }
        let (d, r) = (query.d(), query.r());
        for (c, s) in supports.iter().enumerate() {
            if s.d() != d || s.r() != r {
                return Err(Error::Dimension(format!(
                    "class {c} prototype is {}x{}, query is {d}x{r}",
                    s.d(),
                    s.r()
                )));
            }
        }
        Ok(Self { supports, query })
    }

    pub fn n_classes(&self) -> usize {
        self.supports.len()
    }

    pub fn d(&self) -> usize {
        self.query.d()
    }

    pub fn r(&self) -> usize {
        self.query.r()
    }

    pub fn supports(&self) -> &[FeatureMatrix] {
        &self.supports
    }

    pub fn support(&self, class: usize) -> &FeatureMatrix {
        &self.supports[class]
    }

    pub fn query(&self) -> &FeatureMatrix {
        &self.query
    }
}

/// Averages K shots position-wise into a single prototype.
///
/// Averaging is index-aligned: entry `(i, j)` of the output is the mean of
/// entry `(i, j)` across shots.
pub fn average_prototype(shots: &[FeatureMatrix]) -> Result<FeatureMatrix> {
    let first = shots
        .first()
        .ok_or_else(|| Error::EmptyInput("cannot average zero shots".into()))?;
    let (d, r) = (first.d(), first.r());
    let mut acc = Array2::<f64>::zeros((d, r));
    for shot in shots {
        if shot.d() != d || shot.r() != r {
            return Err(Error::Dimension(format!(
                "shot is {}x{}, expected {d}x{r}",
                shot.d(),
                shot.r()
            )));
        }
        acc += shot.data();
    }
    acc /= shots.len() as f64;
    FeatureMatrix::new(acc)
}

/// Builds an N-way episode from raw per-class shots, averaging each class
/// into its prototype.
pub fn build_episode(
    per_class_shots: &[Vec<FeatureMatrix>],
    query: FeatureMatrix,
) -> Result<Episode> {
    if per_class_shots.is_empty() {
        return Err(Error::EmptyInput("episode needs at least one class".into()));
    }
    let mut supports = Vec::with_capacity(per_class_shots.len());
    for (c, shots) in per_class_shots.iter().enumerate() {
        let proto = average_prototype(shots)
            .map_err(|e| map_class_error(e, c))?;
        if proto.d() != query.d() || proto.r() != query.r() {
            return Err(Error::Dimension(format!(
                "class {c} shots are {}x{}, query is {}x{}",
                proto.d(),
                proto.r(),
                query.d(),
                query.r()
            )));
        }
        supports.push(proto);
    }
    Episode::new(supports, query)
}

fn map_class_error(e: Error, class: usize) -> Error {
    match e {
        Error::Dimension(msg) => Error::Dimension(format!("class {class}: {msg}")),
        Error::EmptyInput(msg) => Error::EmptyInput(format!("class {class}: {msg}")),
        other => other,
    }
}

/// Concatenates the class prototypes into the `d x Nr` support union.
///
/// The layout is class-major: columns `[c*r, (c+1)*r)` hold class `c`'s
/// features in order, so column `j` belongs to class `j / r`.
pub fn flatten_support(episode: &Episode) -> FeatureMatrix {
    let (d, r, n) = (episode.d(), episode.r(), episode.n_classes());
    let mut data = Array2::zeros((d, n * r));
    for (c, s) in episode.supports().iter().enumerate() {
        data.slice_mut(ndarray::s![.., c * r..(c + 1) * r])
            .assign(s.data());
    }
    FeatureMatrix { data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn fm(data: Array2<f64>) -> FeatureMatrix {
        FeatureMatrix::new(data).unwrap()
    }

    #[test]
    fn average_single_shot_is_identity() {
        let m = fm(array![[1.0, 2.0], [3.0, 4.0]]);
        let avg = average_prototype(std::slice::from_ref(&m)).unwrap();
        assert_eq!(avg, m);
    }

    #[test]
    fn average_of_opposites_is_zero() {
        let m = array![[1.0, -2.0], [0.5, 4.0]];
        let shots = vec![fm(m.clone()), fm(-m)];
        let avg = average_prototype(&shots).unwrap();
        assert!(avg.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn average_three_shots_hand_computed() {
        // columns (1,0),(3,0),(5,0) at position 0 average to (3,0)
        let shots = vec![
            fm(array![[1.0, 7.0], [0.0, 1.0]]),
            fm(array![[3.0, 8.0], [0.0, 2.0]]),
            fm(array![[5.0, 9.0], [0.0, 3.0]]),
        ];
        let avg = average_prototype(&shots).unwrap();
        assert_eq!(avg.data(), &array![[3.0, 8.0], [0.0, 2.0]]);
    }

    #[test]
    fn average_is_permutation_invariant() {
        let a = fm(array![[1.0], [2.0]]);
        let b = fm(array![[5.0], [-3.0]]);
        let c = fm(array![[0.25], [9.0]]);
        let fwd = average_prototype(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let rev = average_prototype(&[c, a, b]).unwrap();
        assert_eq!(fwd, rev);
    }

    #[test]
    fn average_rejects_empty_and_mismatched() {
        assert!(matches!(
            average_prototype(&[]),
            Err(Error::EmptyInput(_))
        ));
        let shots = vec![fm(array![[1.0]]), fm(array![[1.0, 2.0]])];
        assert!(matches!(
            average_prototype(&shots),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn build_episode_one_way_one_shot() {
        let m = fm(array![[1.0], [0.0]]);
        let q = fm(array![[0.0], [1.0]]);
        let ep = build_episode(&[vec![m.clone()]], q.clone()).unwrap();
        assert_eq!(ep.n_classes(), 1);
        assert_eq!(ep.support(0), &m);
        assert_eq!(ep.query(), &q);
    }

    #[test]
    fn build_episode_averages_per_class() {
        let c0 = vec![fm(array![[1.0, 0.0]]), fm(array![[3.0, 2.0]])];
        let c1 = vec![fm(array![[10.0, 0.0]]), fm(array![[20.0, 4.0]])];
        let q = fm(array![[0.0, 0.0]]);
        let ep = build_episode(&[c0, c1], q).unwrap();
        assert_eq!(ep.support(0).data(), &array![[2.0, 1.0]]);
        assert_eq!(ep.support(1).data(), &array![[15.0, 2.0]]);
    }

    #[test]
    fn build_episode_identical_shots_keep_prototype() {
        let m = fm(array![[1.0, 2.0], [3.0, 4.0]]);
        let ep = build_episode(
            &[vec![m.clone(), m.clone()], vec![m.clone(), m.clone()]],
            m.clone(),
        )
        .unwrap();
        assert_eq!(ep.support(0), &m);
        assert_eq!(ep.support(1), &m);
    }

    #[test]
    fn build_episode_names_offending_class() {
        let good = vec![fm(array![[1.0, 2.0]])];
        let bad = vec![fm(array![[1.0, 2.0, 3.0]])];
        let q = fm(array![[0.0, 0.0]]);
        match build_episode(&[good, bad], q) {
            Err(Error::Dimension(msg)) => assert!(msg.contains("class 1"), "{msg}"),
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn flatten_is_class_major() {
        let s0 = fm(array![[1.0, 2.0], [0.0, 0.0]]);
        let s1 = fm(array![[3.0, 4.0], [0.0, 0.0]]);
        let q = fm(array![[0.0, 0.0], [1.0, 1.0]]);
        let ep = Episode::new(vec![s0.clone(), s1.clone()], q).unwrap();
        let flat = flatten_support(&ep);
        assert_eq!(flat.r(), 4);
        assert_eq!(flat.data().row(0).to_vec(), vec![1.0, 2.0, 3.0, 4.0]);
        // slicing columns [c*r, (c+1)*r) recovers each class exactly
        assert_eq!(flat.data().column(2), s1.column(0));
    }

    #[test]
    fn flatten_single_class_equals_prototype() {
        let s = fm(array![[1.0, 2.0], [3.0, 4.0]]);
        let q = fm(array![[0.0, 0.0], [0.0, 0.0]]);
        let ep = Episode::new(vec![s.clone()], q).unwrap();
        assert_eq!(flatten_support(&ep).data(), s.data());
    }

    #[test]
    fn flatten_index_arithmetic() {
        // N=3, r=5: column 7 is class 1's feature 2
        let mk = |base: f64| {
            let mut m = Array2::zeros((1, 5));
            for j in 0..5 {
                m[[0, j]] = base + j as f64;
            }
            fm(m)
        };
        let ep = Episode::new(vec![mk(0.0), mk(10.0), mk(20.0)], mk(0.0)).unwrap();
        let flat = flatten_support(&ep);
        assert_eq!(flat.data()[[0, 7]], 12.0);
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(matches!(
            FeatureMatrix::new(array![[f64::NAN]]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            FeatureMatrix::new(Array2::zeros((0, 3))),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            Episode::new(vec![], fm(array![[1.0]])),
            Err(Error::EmptyInput(_))
        ));
    }
}
