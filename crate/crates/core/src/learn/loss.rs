use nalgebra::DMatrix;

use crate::correspondence::{column_softmax, CorrespondenceMatrix};
use crate::geom::{PointCloud, RigidTransform};
use crate::{Error, Result};

/// Cross-entropy of a logit matrix against a hard correspondence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEntropy {
    /// Sum over source points.
    pub total: f64,
    /// `total / N_x`.
    pub mean: f64,
}

fn check(logits: &DMatrix<f64>, c_star: &CorrespondenceMatrix) -> Result<()> {
    if logits.shape() != c_star.entries().shape() {
        return Err(Error::ShapeMismatch(format!(
            "logits {:?} vs correspondence {:?}",
            logits.shape(),
            c_star.entries().shape()
        )));
    }
    if !c_star.is_hard() {
        return Err(Error::InvalidArgument(
            "cross-entropy needs a hard (one-hot) correspondence target".into(),
        ));
    }
    Ok(())
}

/// `L = −Σᵢ log( exp(Σⱼ C′ⱼᵢ C*ⱼᵢ) / Σⱼ exp(C′ⱼᵢ) )` with a per-column
/// log-sum-exp shift.
pub fn cross_entropy_loss(
    logits: &DMatrix<f64>,
    c_star: &CorrespondenceMatrix,
) -> Result<CrossEntropy> {
    check(logits, c_star)?;
    let mut total = 0.0;
    for (col, target) in logits.column_iter().zip(c_star.entries().column_iter()) {
        let max = col.max();
        let lse = max + col.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - col.dot(&target);
    }
    Ok(CrossEntropy {
        total,
        mean: total / logits.ncols() as f64,
    })
}

/// `∂L/∂C′`: column-wise `softmax(C′) − C*`.
pub fn cross_entropy_grad(
    logits: &DMatrix<f64>,
    c_star: &CorrespondenceMatrix,
) -> Result<DMatrix<f64>> {
    check(logits, c_star)?;
    Ok(column_softmax(logits) - c_star.entries())
}

/// `‖Rᵀ R* − I‖²_F + ‖t − t*‖²`.
pub fn dcp_loss(pred: &RigidTransform, truth: &RigidTransform) -> f64 {
    let r = pred.rotation.transpose() * truth.rotation - nalgebra::Matrix3::identity();
    r.norm_squared() + (pred.translation - truth.translation).norm_squared()
}

/// Mean over source points of the L1 distance between the truly and the
/// predictedly transformed copies.
pub fn rpmnet_reg_loss(x: &PointCloud, pred: &RigidTransform, truth: &RigidTransform) -> f64 {
    x.iter()
        .map(|p| (truth.apply_point(p) - pred.apply_point(p)).abs().sum())
        .sum::<f64>()
        / x.len() as f64
}
