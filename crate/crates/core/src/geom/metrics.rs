use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};

use super::rotation::{check_rotation, euler_zyx, geodesic_angle};
use super::PointCloud;
use crate::{Error, Result};

/// How a rotation error is measured. All variants report degrees.
///
/// The Euler variants decompose the relative rotation `R_predᵀ R_true` in the
/// intrinsic Z-Y-X convention and aggregate the three absolute angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RotationMetric {
    /// Angle of the relative rotation (axis-angle error).
    Geodesic,
    /// Mean of the three absolute Euler angles.
    EulerMae,
    /// Root mean square of the three Euler angles.
    EulerRmse,
}

impl RotationMetric {
    pub const ALL: [RotationMetric; 3] = [
        RotationMetric::Geodesic,
        RotationMetric::EulerMae,
        RotationMetric::EulerRmse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RotationMetric::Geodesic => "geodesic",
            RotationMetric::EulerMae => "euler-mae",
            RotationMetric::EulerRmse => "euler-rmse",
        }
    }
}

impl fmt::Display for RotationMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RotationMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RotationMetric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown rotation metric {s:?}")))
    }
}

/// Rotation error in degrees between a predicted and a true rotation.
pub fn rotation_error(
    r_pred: &Matrix3<f64>,
    r_true: &Matrix3<f64>,
    metric: RotationMetric,
) -> Result<f64> {
    check_rotation(r_pred)?;
    check_rotation(r_true)?;
    let rel = r_pred.transpose() * r_true;
    let deg = match metric {
        RotationMetric::Geodesic => geodesic_angle(&rel),
        RotationMetric::EulerMae => euler_zyx(&rel).abs().sum() / 3.0,
        RotationMetric::EulerRmse => (euler_zyx(&rel).norm_squared() / 3.0).sqrt(),
    };
    Ok(deg.to_degrees())
}

/// Euclidean distance between two translations.
pub fn translation_error(t_pred: &Vector3<f64>, t_true: &Vector3<f64>) -> f64 {
    (t_pred - t_true).norm()
}

/// Root mean square of translation errors over a batch; 0 for an empty batch.
pub fn translation_rmse(pairs: &[(Vector3<f64>, Vector3<f64>)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let ss: f64 = pairs.iter().map(|(a, b)| (a - b).norm_squared()).sum();
    (ss / pairs.len() as f64).sqrt()
}

fn mean_nearest(from: &PointCloud, to: &PointCloud) -> f64 {
    from.iter()
        .map(|p| {
            to.iter()
                .map(|q| (p - q).norm_squared())
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .sum::<f64>()
        / from.len() as f64
}

/// Symmetric mean nearest-neighbour distance (not squared) between two clouds.
pub fn chamfer_distance(x: &PointCloud, y: &PointCloud) -> f64 {
    mean_nearest(x, y) + mean_nearest(y, x)
}
