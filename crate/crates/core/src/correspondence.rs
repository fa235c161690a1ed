//! Correspondence matrices.
//!
//! A correspondence matrix `C` has one row per target point and one column per
//! source point; column `i` is a probability distribution over the targets
//! that `x_i` may match. Outlier-augmented matrices carry one extra last row
//! holding the probability that `x_i` matches nothing. The aligned target for
//! `x_i` is `Y · C[:, i]`, i.e. `Ŷ = Y C` with `Y` stored as a 3×N_y matrix.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::geom::PointCloud;
use crate::{Error, Result};

/// Allowed deviation of a column sum from 1.
pub const COLUMN_SUM_TOLERANCE: f64 = 1e-9;

/// Default threshold on nearest-neighbour distance beyond which a source
/// point is labelled an outlier (unit-sphere model coordinates).
pub const DEFAULT_OUTLIER_THRESHOLD: f64 = 0.1;

/// Default target projection for the outlier embedding.
pub const DEFAULT_OUTLIER_B: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    /// One-hot columns.
    Hard,
    /// Arbitrary probability columns.
    Soft,
}

/// Decoded match of one source point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Match {
    Target(usize),
    Outlier,
}

impl Match {
    pub fn target(self) -> Option<usize> {
        match self {
            Match::Target(j) => Some(j),
            Match::Outlier => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceMatrix {
    entries: DMatrix<f64>,
    assignment: Assignment,
    outlier_augmented: bool,
}

impl CorrespondenceMatrix {
    /// Validates entries in `[0, 1]`, unit column sums, and one-hot columns
    /// for hard matrices.
    pub fn new(
        entries: DMatrix<f64>,
        assignment: Assignment,
        outlier_augmented: bool,
    ) -> Result<Self> {
        let min_rows = if outlier_augmented { 2 } else { 1 };
        if entries.nrows() < min_rows || entries.ncols() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "correspondence matrix {}×{} is too small",
                entries.nrows(),
                entries.ncols()
            )));
        }
        for (i, col) in entries.column_iter().enumerate() {
            if let Some(v) = col.iter().find(|v| !(-1e-12..=1.0 + 1e-12).contains(*v)) {
                return Err(Error::InvalidArgument(format!(
                    "column {i} has entry {v} outside [0, 1]"
                )));
            }
            let s = col.sum();
            if (s - 1.0).abs() > COLUMN_SUM_TOLERANCE {
                return Err(Error::InvalidArgument(format!("column {i} sums to {s}")));
            }
            if assignment == Assignment::Hard {
                let ones = col.iter().filter(|&&v| v == 1.0).count();
                let zeros = col.iter().filter(|&&v| v == 0.0).count();
                if ones != 1 || zeros != col.len() - 1 {
                    return Err(Error::InvalidArgument(format!("column {i} is not one-hot")));
                }
            }
        }
        Ok(Self {
            entries,
            assignment,
            outlier_augmented,
        })
    }

    /// Hard matrix from decoded matches.
    pub fn from_matches(
        matches: &[Match],
        n_targets: usize,
        outlier_augmented: bool,
    ) -> Result<Self> {
        let rows = n_targets + usize::from(outlier_augmented);
        let mut m = DMatrix::zeros(rows, matches.len());
        for (i, mt) in matches.iter().enumerate() {
            let row = match *mt {
                Match::Target(j) if j < n_targets => j,
                Match::Target(j) => {
                    return Err(Error::InvalidArgument(format!(
                        "target index {j} >= {n_targets}"
                    )))
                }
                Match::Outlier if outlier_augmented => n_targets,
                Match::Outlier => {
                    return Err(Error::InvalidArgument(
                        "outlier match in a non-augmented matrix".into(),
                    ))
                }
            };
            m[(row, i)] = 1.0;
        }
        Self::new(m, Assignment::Hard, outlier_augmented)
    }

    /// Hard, non-augmented matrix from per-source target indices.
    pub fn from_indices(indices: &[usize], n_targets: usize) -> Result<Self> {
        let matches: Vec<Match> = indices.iter().map(|&j| Match::Target(j)).collect();
        Self::from_matches(&matches, n_targets, false)
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn assignment(&self) -> Assignment {
        self.assignment
    }

    pub fn is_hard(&self) -> bool {
        self.assignment == Assignment::Hard
    }

    pub fn is_outlier_augmented(&self) -> bool {
        self.outlier_augmented
    }

    /// `N_y`, excluding the outlier row.
    pub fn n_targets(&self) -> usize {
        self.entries.nrows() - usize::from(self.outlier_augmented)
    }

    /// `N_x`.
    pub fn n_sources(&self) -> usize {
        self.entries.ncols()
    }

    /// Last row of an augmented matrix.
    pub fn outlier_row(&self) -> Option<DVector<f64>> {
        self.outlier_augmented
            .then(|| self.entries.row(self.entries.nrows() - 1).transpose())
    }

    /// Augmented copy with a zero outlier row appended.
    pub fn with_zero_outlier_row(&self) -> Result<Self> {
        if self.outlier_augmented {
            return Ok(self.clone());
        }
        let m = self.entries.clone().insert_row(self.entries.nrows(), 0.0);
        Self::new(m, self.assignment, true)
    }

    /// CSV dump for inspection: a header of source labels, then one row per
    /// target (and `outlier` last for augmented matrices).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("target");
        for i in 0..self.n_sources() {
            let _ = write!(out, ",x{i}");
        }
        out.push('\n');
        for (j, row) in self.entries.row_iter().enumerate() {
            if j < self.n_targets() {
                let _ = write!(out, "y{j}");
            } else {
                out.push_str("outlier");
            }
            for v in row.iter() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Embedding columns, one per point (`N_e × N`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(DMatrix<f64>);

impl FeatureMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        Ok(Self(data))
    }

    pub fn embedding_dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn len(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.0.ncols() == 0
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// For every source point, the index of and distance to its nearest target.
/// Exhaustive scan; ties go to the lower target index.
pub fn nearest_neighbors(x: &PointCloud, y: &PointCloud) -> Vec<(usize, f64)> {
    x.iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (j, q) in y.iter().enumerate() {
                let d = (p - q).norm_squared();
                if d < best.1 {
                    best = (j, d);
                }
            }
            (best.0, best.1.sqrt())
        })
        .collect()
}

/// One-hot at each source point's nearest target (many-to-one allowed).
/// Both clouds must already be in the same frame.
pub fn ground_truth_correspondence(
    x: &PointCloud,
    y_aligned: &PointCloud,
) -> Result<CorrespondenceMatrix> {
    let idx: Vec<usize> = nearest_neighbors(x, y_aligned)
        .into_iter()
        .map(|(j, _)| j)
        .collect();
    CorrespondenceMatrix::from_indices(&idx, y_aligned.len())
}

/// Like [`ground_truth_correspondence`], but a source point whose nearest
/// target is farther than `threshold` is assigned to the outlier row.
pub fn ground_truth_correspondence_outlier(
    x: &PointCloud,
    y_aligned: &PointCloud,
    threshold: f64,
) -> Result<CorrespondenceMatrix> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "outlier threshold {threshold} must be > 0"
        )));
    }
    let matches: Vec<Match> = nearest_neighbors(x, y_aligned)
        .into_iter()
        .map(|(j, d)| {
            if d <= threshold {
                Match::Target(j)
            } else {
                Match::Outlier
            }
        })
        .collect();
    CorrespondenceMatrix::from_matches(&matches, y_aligned.len(), true)
}

/// Column-wise softmax, stabilized by subtracting each column's maximum.
pub fn column_softmax(logits: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = logits.clone();
    for mut col in out.column_iter_mut() {
        let max = col.max();
        col.apply(|v| *v = (*v - max).exp());
        let s = col.sum();
        col /= s;
    }
    out
}

fn check_dims(fx: &FeatureMatrix, fy: &FeatureMatrix) -> Result<()> {
    if fx.embedding_dim() != fy.embedding_dim() {
        return Err(Error::ShapeMismatch(format!(
            "embedding dims differ: {} vs {}",
            fx.embedding_dim(),
            fy.embedding_dim()
        )));
    }
    if fx.is_empty() || fy.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(())
}

/// Bilinear logits `F_Yᵀ F_X` (`N_y × N_x`).
pub fn correspondence_logits(fx: &FeatureMatrix, fy: &FeatureMatrix) -> Result<DMatrix<f64>> {
    check_dims(fx, fy)?;
    Ok(fy.data().tr_mul(fx.data()))
}

/// `softmax(F_Yᵀ F_X)` over each column.
pub fn soft_correspondence(fx: &FeatureMatrix, fy: &FeatureMatrix) -> Result<CorrespondenceMatrix> {
    let logits = correspondence_logits(fx, fy)?;
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correspondence logits".into()));
    }
    CorrespondenceMatrix::new(column_softmax(&logits), Assignment::Soft, false)
}

/// Least-squares outlier embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierEmbedding {
    pub vector: DVector<f64>,
    /// Set when the feature matrix is numerically zero, leaving the zero vector.
    pub degenerate: bool,
}

/// Minimum-norm solution of `min_f ‖F_Yᵀ f − b·1‖₂` through the SVD
/// pseudoinverse, discarding singular values below `1e-10 · σ_max`.
pub fn outlier_embedding(fy: &FeatureMatrix, b: f64) -> Result<OutlierEmbedding> {
    if fy.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let a = fy.data().transpose();
    let rhs = DVector::from_element(a.nrows(), b);
    let svd = a.svd(true, true);
    let sigma_max = svd.singular_values.max();
    let ne = fy.embedding_dim();
    if !(sigma_max > 0.0) {
        return Ok(OutlierEmbedding {
            vector: DVector::zeros(ne),
            degenerate: true,
        });
    }
    let cutoff = 1e-10 * sigma_max;
    let u = svd.u.as_ref().expect("computed U");
    let vt = svd.v_t.as_ref().expect("computed Vᵀ");
    let mut f = DVector::zeros(ne);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            let coef = u.column(k).dot(&rhs) / s;
            f += vt.row(k).transpose() * coef;
        }
    }
    Ok(OutlierEmbedding {
        vector: f,
        degenerate: false,
    })
}

/// Norm of the least-squares gradient `F_Y (F_Yᵀ f − b·1)`; zero at a minimizer.
pub fn outlier_embedding_stationarity(fy: &FeatureMatrix, f: &DVector<f64>, b: f64) -> f64 {
    let r = fy.data().tr_mul(f).add_scalar(-b);
    (fy.data() * r).norm()
}

/// `softmax([F_Y, f_O]ᵀ F_X)`: an `(N_y + 1) × N_x` matrix whose last row is
/// the outlier probability.
pub fn soft_correspondence_outlier(
    fx: &FeatureMatrix,
    fy: &FeatureMatrix,
    f_outlier: &DVector<f64>,
) -> Result<CorrespondenceMatrix> {
    check_dims(fx, fy)?;
    if f_outlier.len() != fy.embedding_dim() {
        return Err(Error::ShapeMismatch(format!(
            "outlier embedding has {} entries, features have {}",
            f_outlier.len(),
            fy.embedding_dim()
        )));
    }
    let ny = fy.len();
    let mut targets = fy.data().clone().insert_column(ny, 0.0);
    targets.set_column(ny, f_outlier);
    let logits = targets.tr_mul(fx.data());
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correspondence logits".into()));
    }
    CorrespondenceMatrix::new(column_softmax(&logits), Assignment::Soft, true)
}

/// Sinkhorn refinement: add `eps`, then alternate row and column
/// normalization `iters` times. Every iteration ends on the column step, so
/// the result is column-stochastic.
pub fn sinkhorn_normalize(m: &DMatrix<f64>, iters: usize, eps: f64) -> Result<DMatrix<f64>> {
    if iters == 0 {
        return Err(Error::InvalidArgument("sinkhorn needs iters >= 1".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sinkhorn eps {eps} must be > 0"
        )));
    }
    if m.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "sinkhorn input must be finite and nonnegative".into(),
        ));
    }
    if m.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument("sinkhorn input is all zero".into()));
    }
    let mut out = m.add_scalar(eps);
    for _ in 0..iters {
        for mut row in out.row_iter_mut() {
            let s = row.sum();
            row /= s;
        }
        for mut col in out.column_iter_mut() {
            let s = col.sum();
            col /= s;
        }
    }
    Ok(out)
}

pub const DEFAULT_SINKHORN_ITERS: usize = 5;
pub const DEFAULT_SINKHORN_EPS: f64 = 1e-9;

/// Sinkhorn-refined copy of a soft, non-augmented correspondence matrix.
pub fn sinkhorn_refine(
    c: &CorrespondenceMatrix,
    iters: usize,
    eps: f64,
) -> Result<CorrespondenceMatrix> {
    let m = sinkhorn_normalize(c.entries(), iters, eps)?;
    CorrespondenceMatrix::new(m, Assignment::Soft, c.is_outlier_augmented())
}

/// Per-column argmax, ties to the lower row. The last row of an augmented
/// matrix decodes to [`Match::Outlier`].
pub fn hard_assign(c: &CorrespondenceMatrix) -> Vec<Match> {
    let ny = c.n_targets();
    c.entries()
        .column_iter()
        .map(|col| {
            let mut best = 0;
            for (j, &v) in col.iter().enumerate() {
                if v > col[best] {
                    best = j;
                }
            }
            if best < ny {
                Match::Target(best)
            } else {
                Match::Outlier
            }
        })
        .collect()
}

/// Percentage of source points whose decoded match agrees with the reference.
pub fn correspondence_accuracy(
    c_pred: &CorrespondenceMatrix,
    c_star: &CorrespondenceMatrix,
) -> Result<f64> {
    if c_pred.entries().shape() != c_star.entries().shape() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            c_pred.entries().shape(),
            c_star.entries().shape()
        )));
    }
    let a = hard_assign(c_pred);
    let b = hard_assign(c_star);
    let hits = a.iter().zip(&b).filter(|(p, q)| p == q).count();
    Ok(100.0 * hits as f64 / a.len() as f64)
}

/// `Ŷ = Y C`: column `i` is the probability-weighted target of source point `i`.
pub fn weighted_targets(y: &PointCloud, c: &CorrespondenceMatrix) -> Result<Vec<Vector3<f64>>> {
    if c.n_targets() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "correspondence has {} target rows, cloud has {} points",
            c.n_targets(),
            y.len()
        )));
    }
    let ny = y.len();
    Ok(c.entries()
        .column_iter()
        .map(|col| {
            let mut acc = Vector3::zeros();
            for j in 0..ny {
                let w = col[j];
                if w != 0.0 {
                    acc += y[j] * w;
                }
            }
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::unit_cube_cloud;
    use crate::seed;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn random_matrix(r: usize, c: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    fn assert_column_stochastic(m: &DMatrix<f64>, tol: f64) {
        for col in m.column_iter() {
            assert!((col.sum() - 1.0).abs() <= tol, "column sum {}", col.sum());
        }
    }

    #[test]
    fn identity_pattern_for_same_cloud() {
        let x = unit_cube_cloud(20, &mut seed::rng(0));
        let c = ground_truth_correspondence(&x, &x).unwrap();
        assert_eq!(c.entries(), &DMatrix::identity(20, 20));
        assert!(c.is_hard());
    }

    #[test]
    fn reversed_order_gives_anti_diagonal() {
        let x = unit_cube_cloud(9, &mut seed::rng(1));
        let rev: Vec<usize> = (0..9).rev().collect();
        let y = x.select(&rev).unwrap();
        let c = ground_truth_correspondence(&x, &y).unwrap();
        assert_eq!(
            hard_assign(&c),
            rev.iter().map(|&j| Match::Target(j)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn nearest_neighbor_tie_goes_to_lower_index() {
        let x = PointCloud::from_slices(&[[0.0, 0.0, 0.0]]).unwrap();
        let y = PointCloud::from_slices(&[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(
            hard_assign(&ground_truth_correspondence(&x, &y).unwrap()),
            vec![Match::Target(0)]
        );
    }

    #[test]
    fn ground_truth_matches_exhaustive_scan() {
        let mut rng = seed::rng(2);
        let x = unit_cube_cloud(50, &mut rng);
        let y = unit_cube_cloud(70, &mut rng);
        let got = hard_assign(&ground_truth_correspondence(&x, &y).unwrap());
        for (i, p) in x.iter().enumerate() {
            let d: Vec<f64> = y.iter().map(|q| (p - q).norm()).collect();
            let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
            let first = d.iter().position(|&v| v == min).unwrap();
            assert_eq!(got[i], Match::Target(first));
        }
    }

    #[test]
    fn infinite_threshold_has_no_outliers() {
        let mut rng = seed::rng(3);
        let x = unit_cube_cloud(30, &mut rng);
        let y = unit_cube_cloud(25, &mut rng);
        let plain = ground_truth_correspondence(&x, &y).unwrap();
        let aug = ground_truth_correspondence_outlier(&x, &y, f64::INFINITY).unwrap();
        assert!(aug.is_outlier_augmented());
        assert_eq!(aug.entries().rows(0, 25), plain.entries().rows(0, 25));
        assert!(aug.outlier_row().unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(aug, plain.with_zero_outlier_row().unwrap());
    }

    #[test]
    fn displaced_point_is_flagged() {
        let x = unit_cube_cloud(40, &mut seed::rng(4));
        let mut pts = x.points().to_vec();
        pts[17].x += 10.0;
        let xc = PointCloud::new(pts).unwrap();
        let c = ground_truth_correspondence_outlier(&xc, &x, 0.1).unwrap();
        let flagged: Vec<usize> = hard_assign(&c)
            .iter()
            .enumerate()
            .filter(|(_, m)| **m == Match::Outlier)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(flagged, vec![17]);
        assert!(ground_truth_correspondence_outlier(&xc, &x, 0.0).is_err());
    }

    #[test]
    fn uniform_logits_give_uniform_columns() {
        let f = FeatureMatrix::new(DMatrix::from_element(4, 6, 0.3)).unwrap();
        let c = soft_correspondence(&f, &f).unwrap();
        assert!(c.entries().iter().all(|&v| (v - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn scaled_identity_features() {
        // Features scaled by √s put a logit of s on the diagonal and 0 elsewhere.
        let s: f64 = 2.5;
        let f = FeatureMatrix::new(DMatrix::identity(2, 2) * s.sqrt()).unwrap();
        let c = soft_correspondence(&f, &f).unwrap();
        let expected = s.exp() / (s.exp() + 1.0);
        assert_abs_diff_eq!(c.entries()[(0, 0)], expected, epsilon = 1e-15);
        assert_abs_diff_eq!(c.entries()[(1, 1)], expected, epsilon = 1e-15);
    }

    #[test]
    fn soft_columns_sum_to_one() {
        let mut rng = seed::rng(5);
        for _ in 0..20 {
            let fx = FeatureMatrix::new(random_matrix(8, 13, &mut rng) * 5.0).unwrap();
            let fy = FeatureMatrix::new(random_matrix(8, 11, &mut rng) * 5.0).unwrap();
            let c = soft_correspondence(&fx, &fy).unwrap();
            assert_column_stochastic(c.entries(), 1e-12);
        }
        let fx = FeatureMatrix::new(DMatrix::zeros(3, 2)).unwrap();
        let fy = FeatureMatrix::new(DMatrix::zeros(4, 2)).unwrap();
        assert!(matches!(
            soft_correspondence(&fx, &fy),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let mut rng = seed::rng(6);
        let m = random_matrix(7, 5, &mut rng) * 10.0;
        let mut shifted = m.clone();
        for (i, mut col) in shifted.column_iter_mut().enumerate() {
            col.add_scalar_mut(100.0 * i as f64 - 250.0);
        }
        assert_abs_diff_eq!(
            column_softmax(&m),
            column_softmax(&shifted),
            epsilon = 1e-12
        );
    }

    #[test]
    fn outlier_embedding_identity() {
        let fy = FeatureMatrix::new(DMatrix::identity(5, 5)).unwrap();
        let e = outlier_embedding(&fy, -1.0).unwrap();
        assert!(!e.degenerate);
        assert_abs_diff_eq!(e.vector, DVector::from_element(5, -1.0), epsilon = 1e-14);
    }

    #[test]
    fn outlier_embedding_orthonormal_columns_zero_residual() {
        let mut rng = seed::rng(7);
        let q = random_matrix(10, 4, &mut rng).qr().q();
        let fy = FeatureMatrix::new(q).unwrap();
        let e = outlier_embedding(&fy, -1.0).unwrap();
        let resid = (fy.data().tr_mul(&e.vector).add_scalar(1.0)).norm();
        assert!(resid < 1e-12, "residual {resid}");
        // Minimum-norm normal equations for the wide system Fᵀ f = b1:
        // f = F (Fᵀ F)⁻¹ b1.
        let gram = fy.data().tr_mul(fy.data());
        let z = gram.lu().solve(&DVector::from_element(4, -1.0)).unwrap();
        let oracle = fy.data() * z;
        assert_abs_diff_eq!(e.vector, oracle, epsilon = 1e-10);
    }

    #[test]
    fn outlier_embedding_beats_random_candidates() {
        let mut rng = seed::rng(8);
        let fy = FeatureMatrix::new(random_matrix(6, 40, &mut rng)).unwrap();
        let e = outlier_embedding(&fy, -1.0).unwrap();
        let resid = |f: &DVector<f64>| fy.data().tr_mul(f).add_scalar(1.0).norm();
        let best = resid(&e.vector);
        for _ in 0..1000 {
            let cand = &e.vector + DVector::from_fn(6, |_, _| rng.random::<f64>() - 0.5);
            assert!(best <= resid(&cand));
        }
        assert!(outlier_embedding_stationarity(&fy, &e.vector, -1.0) < 1e-10);
    }

    #[test]
    fn outlier_embedding_rank_deficient_is_min_norm() {
        // Two identical feature rows: the solution splits evenly between them.
        let mut m = DMatrix::zeros(2, 3);
        m.row_mut(0).fill(1.0);
        m.row_mut(1).fill(1.0);
        let e = outlier_embedding(&FeatureMatrix::new(m).unwrap(), -1.0).unwrap();
        assert_abs_diff_eq!(e.vector, DVector::from_element(2, -0.5), epsilon = 1e-12);
    }

    #[test]
    fn zero_features_are_degenerate() {
        let e =
            outlier_embedding(&FeatureMatrix::new(DMatrix::zeros(4, 7)).unwrap(), -1.0).unwrap();
        assert!(e.degenerate);
        assert_eq!(e.vector, DVector::zeros(4));
    }

    #[test]
    fn saturated_outlier_row_vanishes() {
        let mut rng = seed::rng(9);
        let fx = FeatureMatrix::new(random_matrix(3, 6, &mut rng)).unwrap();
        let fy = FeatureMatrix::new(random_matrix(3, 4, &mut rng)).unwrap();
        // All source features share a positive first coordinate, so a huge
        // negative first component drives every outlier logit to about -1e6.
        let mut fx_data = fx.data().clone();
        fx_data.row_mut(0).fill(1.0);
        let fx = FeatureMatrix::new(fx_data).unwrap();
        let f_o = DVector::from_vec(vec![-1e6, 0.0, 0.0]);
        let c = soft_correspondence_outlier(&fx, &fy, &f_o).unwrap();
        assert!(c.outlier_row().unwrap().iter().all(|&v| v < 1e-300));
        assert_column_stochastic(c.entries(), 1e-12);
    }

    #[test]
    fn outlier_equal_to_single_target_splits_evenly() {
        let fx = FeatureMatrix::new(DMatrix::from_vec(2, 3, vec![1.0, 2.0, -1.0, 0.5, 0.0, 3.0]))
            .unwrap();
        let fy = FeatureMatrix::new(DMatrix::from_vec(2, 1, vec![0.4, -0.7])).unwrap();
        let f_o = fy.data().column(0).into_owned();
        let c = soft_correspondence_outlier(&fx, &fy, &f_o).unwrap();
        assert!(c.entries().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn outlier_variant_reduces_to_plain_softmax() {
        let mut rng = seed::rng(10);
        let mut fx_data = random_matrix(4, 9, &mut rng);
        fx_data.row_mut(0).fill(1.0);
        let fx = FeatureMatrix::new(fx_data).unwrap();
        let fy = FeatureMatrix::new(random_matrix(4, 6, &mut rng)).unwrap();
        let f_o = DVector::from_vec(vec![-1e3, 0.0, 0.0, 0.0]);
        let aug = soft_correspondence_outlier(&fx, &fy, &f_o).unwrap();
        let mut inliers = aug.entries().rows(0, 6).into_owned();
        for mut col in inliers.column_iter_mut() {
            let s = col.sum();
            col /= s;
        }
        let plain = soft_correspondence(&fx, &fy).unwrap();
        assert_abs_diff_eq!(&inliers, plain.entries(), epsilon = 1e-12);
    }

    #[test]
    fn sinkhorn_fixed_points() {
        let id = DMatrix::<f64>::identity(2, 2);
        assert_abs_diff_eq!(
            sinkhorn_normalize(&id, 5, 1e-9).unwrap(),
            id,
            epsilon = 1e-9
        );
        let ds = DMatrix::from_row_slice(3, 3, &[0.2, 0.3, 0.5, 0.5, 0.2, 0.3, 0.3, 0.5, 0.2]);
        assert_abs_diff_eq!(
            sinkhorn_normalize(&ds, 5, 1e-9).unwrap(),
            ds,
            epsilon = 1e-9
        );
    }

    #[test]
    fn sinkhorn_converges_to_doubly_stochastic() {
        let mut rng = seed::rng(11);
        let m = DMatrix::from_fn(5, 5, |_, _| rng.random::<f64>() + 0.01);
        let s = sinkhorn_normalize(&m, 50, 1e-9).unwrap();
        assert_column_stochastic(&s, 1e-12);
        for row in s.row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn sinkhorn_errors() {
        assert!(sinkhorn_normalize(&DMatrix::zeros(3, 3), 5, 1e-9).is_err());
        assert!(sinkhorn_normalize(&DMatrix::from_element(2, 2, -1.0), 5, 1e-9).is_err());
        assert!(sinkhorn_normalize(&DMatrix::identity(2, 2), 0, 1e-9).is_err());
        assert!(sinkhorn_normalize(&DMatrix::identity(2, 2), 1, 0.0).is_err());
    }

    #[test]
    fn hard_assign_examples() {
        let c = CorrespondenceMatrix::from_indices(&[2, 0, 1, 2], 3).unwrap();
        assert_eq!(
            hard_assign(&c),
            vec![
                Match::Target(2),
                Match::Target(0),
                Match::Target(1),
                Match::Target(2)
            ]
        );
        let uniform =
            CorrespondenceMatrix::new(DMatrix::from_element(4, 1, 0.25), Assignment::Soft, false)
                .unwrap();
        assert_eq!(hard_assign(&uniform), vec![Match::Target(0)]);
    }

    #[test]
    fn hard_assign_matches_linear_scan() {
        let mut rng = seed::rng(12);
        let fx = FeatureMatrix::new(random_matrix(5, 30, &mut rng)).unwrap();
        let fy = FeatureMatrix::new(random_matrix(5, 20, &mut rng)).unwrap();
        let c = soft_correspondence(&fx, &fy).unwrap();
        let got = hard_assign(&c);
        for (i, col) in c.entries().column_iter().enumerate() {
            let (arg, _) = col.argmax();
            assert_eq!(got[i], Match::Target(arg));
        }
    }

    #[test]
    fn accuracy_examples() {
        let n = 512;
        let id: Vec<usize> = (0..n).collect();
        let star = CorrespondenceMatrix::from_indices(&id, n).unwrap();
        assert_eq!(correspondence_accuracy(&star, &star).unwrap(), 100.0);
        let shifted: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
        let wrong = CorrespondenceMatrix::from_indices(&shifted, n).unwrap();
        assert_eq!(correspondence_accuracy(&wrong, &star).unwrap(), 0.0);
        let half: Vec<usize> = (0..n)
            .map(|i| if i < n / 2 { i } else { (i + 1) % n })
            .collect();
        let half = CorrespondenceMatrix::from_indices(&half, n).unwrap();
        assert_eq!(correspondence_accuracy(&half, &star).unwrap(), 50.0);
        let other = CorrespondenceMatrix::from_indices(&[0, 1], 3).unwrap();
        assert!(correspondence_accuracy(&other, &star).is_err());
    }

    #[test]
    fn validation_rejects_bad_matrices() {
        let bad = DMatrix::from_row_slice(2, 1, &[0.7, 0.7]);
        assert!(CorrespondenceMatrix::new(bad, Assignment::Soft, false).is_err());
        let soft = DMatrix::from_row_slice(2, 1, &[0.5, 0.5]);
        assert!(CorrespondenceMatrix::new(soft, Assignment::Hard, false).is_err());
        assert!(CorrespondenceMatrix::from_indices(&[3], 3).is_err());
        assert!(CorrespondenceMatrix::from_matches(&[Match::Outlier], 3, false).is_err());
    }

    #[test]
    fn csv_dump_layout() {
        let c = CorrespondenceMatrix::from_matches(&[Match::Target(1), Match::Outlier], 2, true)
            .unwrap();
        assert_eq!(c.to_csv(), "target,x0,x1\ny0,0,0\ny1,1,0\noutlier,0,1\n");
    }

    #[test]
    fn weighted_targets_are_convex_combinations() {
        let y = PointCloud::from_slices(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap();
        let c = CorrespondenceMatrix::new(
            DMatrix::from_row_slice(2, 1, &[0.25, 0.75]),
            Assignment::Soft,
            false,
        )
        .unwrap();
        assert_eq!(
            weighted_targets(&y, &c).unwrap(),
            vec![Vector3::new(1.5, 0.0, 0.0)]
        );
    }
}
