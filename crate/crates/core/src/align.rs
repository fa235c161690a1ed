//! Closed-form rigid alignment from correspondences.
//!
//! Every solver here funnels into one weighted SVD (Arun/Kabsch) routine:
//! weighted centroids, cross-covariance `H = Σ wᵢ (xᵢ − x̄)(yᵢ − ȳ)ᵀ`,
//! `H = U S Vᵀ`, `R = V diag(1, 1, det(V Uᵀ)) Uᵀ`, `t = ȳ − R x̄`.
//! The determinant correction rules out reflections.

use nalgebra::{Matrix3, Vector3};

use crate::correspondence::{nearest_neighbors, weighted_targets, CorrespondenceMatrix};
use crate::geom::{geodesic_angle, PointCloud, RigidTransform};
use crate::{Error, Result};

/// Smallest total weight accepted before centroids are considered undefined.
const MIN_TOTAL_WEIGHT: f64 = 1e-12;

/// Relative size of the second singular value of `H` below which the
/// configuration is treated as collinear.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentResult {
    pub transform: RigidTransform,
    /// Weighted RMS of `‖R xᵢ + t − yᵢ‖` over the pairs used.
    pub residual: f64,
    /// Sum of the pair weights (the pair count for unweighted solves).
    pub effective_weight: f64,
}

fn weighted_procrustes(
    x: &[Vector3<f64>],
    y: &[Vector3<f64>],
    w: &[f64],
) -> Result<AlignmentResult> {
    debug_assert!(x.len() == y.len() && x.len() == w.len());
    let total: f64 = w.iter().sum();
    if !total.is_finite() {
        return Err(Error::NonFinite("alignment weights".into()));
    }
    if total < MIN_TOTAL_WEIGHT {
        return Err(Error::InsufficientInliers(total));
    }
    let mut cx = Vector3::zeros();
    let mut cy = Vector3::zeros();
    for ((p, q), &wi) in x.iter().zip(y).zip(w) {
        cx += p * wi;
        cy += q * wi;
    }
    cx /= total;
    cy /= total;

    let mut h = Matrix3::zeros();
    for ((p, q), &wi) in x.iter().zip(y).zip(w) {
        if wi != 0.0 {
            h += (p - cx) * (q - cy).transpose() * wi;
        }
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cross-covariance".into()));
    }

    let svd = h.svd(true, true);
    let u = svd.u.ok_or(Error::Degenerate)?;
    let v = svd.v_t.ok_or(Error::Degenerate)?.transpose();
    let s = svd.singular_values;
    let mut sorted = [s[0], s[1], s[2]];
    sorted.sort_by(|a, b| b.total_cmp(a));
    if !(sorted[0] > 0.0) || sorted[1] <= RANK_TOLERANCE * sorted[0] {
        return Err(Error::Degenerate);
    }

    let mut correction = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        // Flip the direction belonging to the smallest singular value.
        let k = s.imin();
        correction[(k, k)] = -1.0;
    }
    let rotation = v * correction * u.transpose();
    let translation = cy - rotation * cx;
    let transform = RigidTransform {
        rotation,
        translation,
    };

    let mut ss = 0.0;
    for ((p, q), &wi) in x.iter().zip(y).zip(w) {
        ss += wi * (transform.apply_point(p) - q).norm_squared();
    }
    Ok(AlignmentResult {
        transform,
        residual: (ss / total).max(0.0).sqrt(),
        effective_weight: total,
    })
}

fn check_pairs(nx: usize, ny: usize) -> Result<()> {
    if nx != ny {
        return Err(Error::ShapeMismatch(format!(
            "{nx} source points vs {ny} paired targets"
        )));
    }
    if nx < 3 {
        return Err(Error::Underdetermined(nx));
    }
    Ok(())
}

/// Least-squares rigid transform taking `x[i]` onto `y_paired[i]`.
pub fn horn_align(x: &PointCloud, y_paired: &PointCloud) -> Result<AlignmentResult> {
    align_pairs(x.points(), y_paired.points())
}

/// [`horn_align`] on raw point slices.
pub fn align_pairs(x: &[Vector3<f64>], y: &[Vector3<f64>]) -> Result<AlignmentResult> {
    check_pairs(x.len(), y.len())?;
    weighted_procrustes(x, y, &vec![1.0; x.len()])
}

/// Aligns `x` onto the probability-weighted targets `Ŷ = Y C`.
pub fn weighted_align(
    x: &PointCloud,
    y: &PointCloud,
    c: &CorrespondenceMatrix,
) -> Result<AlignmentResult> {
    if c.is_outlier_augmented() {
        return Err(Error::InvalidArgument(
            "weighted_align takes a non-augmented matrix; use weighted_align_outlier".into(),
        ));
    }
    if c.n_sources() != x.len() {
        return Err(Error::ShapeMismatch(format!(
            "correspondence has {} columns, source has {} points",
            c.n_sources(),
            x.len()
        )));
    }
    let targets = weighted_targets(y, c)?;
    align_pairs(x.points(), &targets)
}

/// Outlier-weighted alignment from an augmented matrix.
///
/// Source point `i` gets weight `wᵢ = 1 − C[N_y, i]` and target `ŷᵢ = Y c̃ᵢ`,
/// where `c̃ᵢ` is the inlier part of column `i` renormalized to sum to one.
/// Columns with no inlier mass get weight 0.
pub fn weighted_align_outlier(
    x: &PointCloud,
    y: &PointCloud,
    c_o: &CorrespondenceMatrix,
) -> Result<AlignmentResult> {
    if !c_o.is_outlier_augmented() {
        return Err(Error::InvalidArgument(
            "weighted_align_outlier needs an augmented matrix".into(),
        ));
    }
    let ny = c_o.n_targets();
    if ny != y.len() || c_o.n_sources() != x.len() {
        return Err(Error::ShapeMismatch(format!(
            "augmented matrix {:?} vs clouds {}×{}",
            c_o.entries().shape(),
            y.len(),
            x.len()
        )));
    }
    let mut targets = Vec::with_capacity(x.len());
    let mut weights = Vec::with_capacity(x.len());
    for col in c_o.entries().column_iter() {
        let inlier_mass: f64 = col.rows(0, ny).sum();
        if inlier_mass <= MIN_TOTAL_WEIGHT {
            targets.push(Vector3::zeros());
            weights.push(0.0);
            continue;
        }
        let mut acc = Vector3::zeros();
        for j in 0..ny {
            if col[j] != 0.0 {
                acc += y[j] * col[j];
            }
        }
        targets.push(acc / inlier_mass);
        weights.push((1.0 - col[ny]).clamp(0.0, 1.0));
    }
    let total: f64 = weights.iter().sum();
    if total < 3.0 {
        return Err(Error::InsufficientInliers(total));
    }
    weighted_procrustes(x.points(), &targets, &weights)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpOptions {
    pub max_iters: usize,
    /// Convergence threshold on both the rotation change (radians) and the
    /// translation change between consecutive estimates.
    pub tol: f64,
}

impl Default for IcpOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpIteration {
    pub iteration: usize,
    /// RMS pairing error after the closed-form update.
    pub residual: f64,
    pub rotation_change: f64,
    pub translation_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    pub alignment: AlignmentResult,
    pub trace: Vec<IcpIteration>,
    pub converged: bool,
}

/// Point-to-point ICP: alternate nearest-neighbour pairing of the moved
/// source with a closed-form re-solve from the original source.
pub fn icp(
    x: &PointCloud,
    y: &PointCloud,
    t_init: &RigidTransform,
    options: IcpOptions,
) -> Result<IcpResult> {
    if options.max_iters == 0 {
        return Err(Error::InvalidArgument("icp needs max_iters >= 1".into()));
    }
    if !(options.tol > 0.0) {
        return Err(Error::InvalidArgument("icp needs tol > 0".into()));
    }
    let mut current = *t_init;
    let mut trace = Vec::new();
    let mut last = None;
    let mut converged = false;
    for iteration in 1..=options.max_iters {
        let moved = x.transformed(&current);
        let paired: Vec<Vector3<f64>> = nearest_neighbors(&moved, y)
            .into_iter()
            .map(|(j, _)| y[j])
            .collect();
        let result = align_pairs(x.points(), &paired)?;
        let next = result.transform;
        let rotation_change = geodesic_angle(&(current.rotation.transpose() * next.rotation));
        let translation_change = (next.translation - current.translation).norm();
        trace.push(IcpIteration {
            iteration,
            residual: result.residual,
            rotation_change,
            translation_change,
        });
        current = next;
        last = Some(result);
        if rotation_change < options.tol && translation_change < options.tol {
            converged = true;
            break;
        }
    }
    Ok(IcpResult {
        alignment: last.expect("at least one iteration"),
        trace,
        converged,
    })
}
