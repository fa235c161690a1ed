//! Synthetic registration pairs.

use corrmatch_core::correspondence::{ground_truth_correspondence, CorrespondenceMatrix};
use corrmatch_core::geom::{
    crop_partial, generate_shape, random_unit_vector, sample_misalignment, PointCloud,
    RigidTransform, RotationVector, ShapeKind,
};
use corrmatch_core::learn::Sample;
use corrmatch_core::{seed, Result};
use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::config::ExperimentConfig;

/// Misalignment ranges of the sweep, degrees. The last one includes 180.
pub const BUCKETS: [(f64, f64); 6] = [
    (0.0, 30.0),
    (30.0, 60.0),
    (60.0, 90.0),
    (90.0, 120.0),
    (120.0, 150.0),
    (150.0, 180.0),
];

pub fn bucket_label((lo, hi): (f64, f64)) -> String {
    format!("{lo}-{hi}")
}

/// Source `x`, target `y = truth(x)` in shuffled order.
#[derive(Debug, Clone)]
pub struct Pair {
    pub x: PointCloud,
    pub y: PointCloud,
    pub truth: RigidTransform,
}

impl Pair {
    pub fn c_star(&self) -> Result<CorrespondenceMatrix> {
        ground_truth_correspondence(&self.x.transformed(&self.truth), &self.y)
    }

    /// Replaces the source with a partial crop; the target stays whole.
    pub fn cropped(self, keep_fraction: f64, crop_seed: u64) -> Result<Pair> {
        if keep_fraction >= 1.0 {
            return Ok(self);
        }
        let crop = crop_partial(&self.x, keep_fraction, &mut seed::rng(crop_seed))?;
        Ok(Pair {
            x: crop.cloud,
            ..self
        })
    }

    pub fn into_sample(self, knn_k: usize) -> Result<Sample> {
        Sample::new(self.x, self.y, self.truth, knn_k)
    }
}

/// Cloud and target order come from `cloud_seed`; the transform is given.
pub fn make_pair(
    shape: ShapeKind,
    n: usize,
    cloud_seed: u64,
    truth: RigidTransform,
) -> Result<Pair> {
    let x = generate_shape(shape, n, &mut seed::child_rng(cloud_seed, "shape"))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::child_rng(cloud_seed, "target-order"));
    let y = x.transformed(&truth).select(&order)?;
    Ok(Pair { x, y, truth })
}

/// A pair with a misalignment drawn by [`sample_misalignment`].
pub fn random_pair(
    shape: ShapeKind,
    n: usize,
    pair_seed: u64,
    theta0: f64,
    t_bound: f64,
) -> Result<Pair> {
    let truth = sample_misalignment(
        &mut seed::child_rng(pair_seed, "misalignment"),
        theta0,
        t_bound,
    );
    make_pair(shape, n, pair_seed, truth)
}

/// Pure rotation with uniform axis and angle uniform in `[lo, hi)` degrees.
pub fn bucket_rotation<R: Rng + ?Sized>(bucket: (f64, f64), rng: &mut R) -> RigidTransform {
    let axis = random_unit_vector(rng);
    let angle = (bucket.0 + (bucket.1 - bucket.0) * rng.random::<f64>()).to_radians();
    RigidTransform::from_rotvec(
        &RotationVector::from_axis_angle(&axis, angle),
        Vector3::zeros(),
    )
}

/// `count` training-style samples under the `label` namespace. Sources are
/// cropped to `keep_fraction`.
pub fn dataset(
    cfg: &ExperimentConfig,
    label: &str,
    count: usize,
    keep_fraction: f64,
) -> Result<Vec<Sample>> {
    let root = seed::derive(cfg.seed, label);
    (0..count)
        .into_par_iter()
        .map(|i| {
            let s = seed::derive_indexed(root, "cloud", i as u64);
            random_pair(cfg.shape, cfg.n_points, s, cfg.train_theta0(), cfg.t_bound)?
                .cropped(keep_fraction, seed::derive(s, "crop"))?
                .into_sample(cfg.knn_k)
        })
        .collect()
}
