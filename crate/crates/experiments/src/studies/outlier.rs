//! Outlier-augmented correspondences with a fraction of the source moved to
//! random positions.

use corrmatch_core::align::weighted_align_outlier;
use corrmatch_core::correspondence::{
    ground_truth_correspondence_outlier, hard_assign, nearest_neighbors, outlier_embedding,
    outlier_embedding_stationarity, Match,
};
use corrmatch_core::geom::{
    generate_shape, rotation_error, sample_misalignment, unit_cube_cloud, PointCloud,
    RotationMetric,
};
use corrmatch_core::learn::{featurize, FeatureNet};
use corrmatch_core::{seed, Error as CoreError};
use rand::seq::index::sample;
use rand::seq::SliceRandom;

use super::par_rows;
use crate::config::ExperimentConfig;
use crate::report::{trial_rows, StudyOutput, TrialResult};
use crate::Result;

pub const STUDY: &str = "outlier";

/// Placement attempts per corrupted point under rejection sampling.
const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

pub fn param(fraction: f64) -> String {
    format!("fraction={fraction}")
}

/// Number of source points moved: `⌊fraction·N⌋`.
pub fn corrupted_points(fraction: f64, n: usize) -> usize {
    (fraction * n as f64).floor() as usize
}

/// Moves `⌊fraction·N⌋` randomly chosen points of `x` to uniform positions in
/// the unit cube. With `reject_within`, a position closer than that to any
/// original point is redrawn. Returns the new cloud and the moved indices.
pub fn corrupt_points(
    x: &PointCloud,
    fraction: f64,
    reject_within: Option<f64>,
    rng: &mut corrmatch_core::seed::Rng,
) -> corrmatch_core::Result<(PointCloud, Vec<usize>)> {
    let mut moved = sample(rng, x.len(), corrupted_points(fraction, x.len())).into_vec();
    moved.sort_unstable();
    let mut pts = x.points().to_vec();
    for &i in &moved {
        let mut attempts = 0;
        pts[i] = loop {
            let p = unit_cube_cloud(1, rng)[0];
            let Some(d) = reject_within else { break p };
            if x.iter().all(|q| (p - q).norm() > d) {
                break p;
            }
            attempts += 1;
            if attempts == MAX_PLACEMENT_ATTEMPTS {
                return Err(CoreError::InvalidArgument(format!(
                    "no position in the unit cube is farther than {d} from the cloud"
                )));
            }
        };
    }
    Ok((PointCloud::new(pts)?, moved))
}

/// Percent of predicted outliers that were moved, and of moved points that
/// were flagged. Empty denominators count as 100.
fn precision_recall(predicted: &[usize], actual: &[usize]) -> (f64, f64) {
    let hits = predicted.iter().filter(|i| actual.contains(i)).count() as f64;
    let ratio = |d: usize| {
        if d == 0 {
            100.0
        } else {
            100.0 * hits / d as f64
        }
    };
    (ratio(predicted.len()), ratio(actual.len()))
}

/// Oracle `C^{O*}` with outlier-weighted alignment. The outlier embedding is
/// solved on features from `net`, or from a seeded untrained network.
pub fn run_outlier_experiment(
    cfg: &ExperimentConfig,
    net: Option<&FeatureNet>,
) -> Result<StudyOutput> {
    cfg.validate()?;
    let root = seed::derive(cfg.seed, STUDY);
    let untrained;
    let net = match net {
        Some(n) => n,
        None => {
            untrained = FeatureNet::new(cfg.net_config(), &mut seed::child_rng(root, "net"));
            &untrained
        }
    };
    let jobs: Vec<usize> = (0..cfg.trials).collect();
    let rows = par_rows(&jobs, |&trial| {
        let s = seed::derive_indexed(root, "trial", trial as u64);
        let result = (|| -> TrialResult {
            let x = generate_shape(
                cfg.shape,
                cfg.outlier_points,
                &mut seed::child_rng(s, "shape"),
            )?;
            let truth = sample_misalignment(
                &mut seed::child_rng(s, "misalignment"),
                cfg.outlier_theta0_deg.to_radians(),
                cfg.t_bound,
            );
            let mut order: Vec<usize> = (0..x.len()).collect();
            order.shuffle(&mut seed::child_rng(s, "target-order"));
            let y = x.transformed(&truth).select(&order)?;

            let reject = cfg.outlier_rejection.then_some(cfg.outlier_threshold);
            let (xc, moved) = corrupt_points(
                &x,
                cfg.outlier_fraction,
                reject,
                &mut seed::child_rng(s, "corrupt"),
            )?;
            let c_o = ground_truth_correspondence_outlier(
                &xc.transformed(&truth),
                &y,
                cfg.outlier_threshold,
            )?;
            let est = weighted_align_outlier(&xc, &y, &c_o)?;

            let flagged: Vec<usize> = hard_assign(&c_o)
                .iter()
                .enumerate()
                .filter(|(_, m)| **m == Match::Outlier)
                .map(|(i, _)| i)
                .collect();
            let (precision, recall) = precision_recall(&flagged, &moved);

            let fy = featurize(net, &y)?;
            let f_o = outlier_embedding(&fy, cfg.outlier_b)?;
            let stationarity = outlier_embedding_stationarity(&fy, &f_o.vector, cfg.outlier_b);

            // Distance from each moved point to its nearest target, for reference.
            let min_gap = nearest_neighbors(&xc.transformed(&truth), &y)
                .iter()
                .enumerate()
                .filter(|(i, _)| moved.binary_search(i).is_ok())
                .map(|(_, (_, d))| *d)
                .fold(f64::INFINITY, f64::min);

            let (r, r_true) = (&est.transform.rotation, &truth.rotation);
            Ok(vec![
                (
                    "geodesic_deg",
                    rotation_error(r, r_true, RotationMetric::Geodesic)?,
                ),
                (
                    "euler_mae_deg",
                    rotation_error(r, r_true, RotationMetric::EulerMae)?,
                ),
                (
                    "translation_error",
                    (est.transform.translation - truth.translation).norm(),
                ),
                ("precision", precision),
                ("recall", recall),
                ("effective_weight", est.effective_weight),
                ("stationarity", stationarity),
                (
                    "min_outlier_gap",
                    if moved.is_empty() { 0.0 } else { min_gap },
                ),
            ])
        })();
        trial_rows(STUDY, trial, s, &param(cfg.outlier_fraction), result)
    });
    Ok(StudyOutput::new(STUDY, rows)
        .with_note(
            "corruption",
            "floor(fraction*N) source points moved uniformly into [-0.5, 0.5]^3",
        )
        .with_note(
            "outlier_embedding",
            "least squares F_Y^T f = b*1, minimum-norm solution",
        ))
}
