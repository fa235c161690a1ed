//! Registration accuracy per initial-misalignment bucket.

use corrmatch_core::align::weighted_align;
use corrmatch_core::correspondence::{correspondence_accuracy, soft_correspondence};
use corrmatch_core::geom::{rotation_error, RotationMetric};
use corrmatch_core::learn::{featurize, FeatureNet};
use corrmatch_core::seed;

use super::par_rows;
use crate::config::{ExperimentConfig, Mode};
use crate::data::{bucket_label, bucket_rotation, make_pair, Pair, BUCKETS};
use crate::report::{trial_rows, Row, StudyOutput, TrialResult};
use crate::{Error, Result};

pub const STUDY: &str = "sweep";

pub fn param(bucket: (f64, f64)) -> String {
    format!("bucket={}", bucket_label(bucket))
}

/// Registers one pair with oracle or learned correspondences.
pub(crate) fn register_pair(pair: &Pair, net: Option<&FeatureNet>) -> TrialResult {
    let c_star = pair.c_star()?;
    let c = match net {
        None => c_star.clone(),
        Some(net) => soft_correspondence(&featurize(net, &pair.x)?, &featurize(net, &pair.y)?)?,
    };
    let est = weighted_align(&pair.x, &pair.y, &c)?.transform;
    let (r, r_true) = (&est.rotation, &pair.truth.rotation);
    Ok(vec![
        (
            "euler_mae_deg",
            rotation_error(r, r_true, RotationMetric::EulerMae)?,
        ),
        (
            "geodesic_deg",
            rotation_error(r, r_true, RotationMetric::Geodesic)?,
        ),
        (
            "translation_error",
            (est.translation - pair.truth.translation).norm(),
        ),
        ("accuracy", correspondence_accuracy(&c, &c_star)?),
    ])
}

pub(crate) fn require_net<'a>(
    cfg: &ExperimentConfig,
    net: Option<&'a FeatureNet>,
) -> Result<Option<&'a FeatureNet>> {
    match (cfg.mode, net) {
        (Mode::Oracle, _) => Ok(None),
        (Mode::Learned, Some(n)) => Ok(Some(n)),
        (Mode::Learned, None) => Err(Error::Config("learned mode needs a checkpoint".into())),
    }
}

/// Trial `t` uses the same cloud and target order in every bucket; only the
/// rotation changes. The partial study shares these seeds.
pub(crate) fn bucket_rows(
    cfg: &ExperimentConfig,
    study: &'static str,
    keep_fraction: f64,
    net: Option<&FeatureNet>,
) -> Vec<Row> {
    let clouds = seed::derive(cfg.seed, "pairs");
    let jobs: Vec<(usize, usize)> = (0..BUCKETS.len())
        .flat_map(|b| (0..cfg.trials).map(move |t| (b, t)))
        .collect();
    par_rows(&jobs, |&(b, trial)| {
        let cloud_seed = seed::derive_indexed(clouds, "cloud", trial as u64);
        let rot_seed = seed::derive_indexed(
            seed::derive_indexed(cfg.seed, "bucket-rotation", b as u64),
            "trial",
            trial as u64,
        );
        let result = (|| -> TrialResult {
            let truth = bucket_rotation(BUCKETS[b], &mut seed::rng(rot_seed));
            let pair = make_pair(cfg.shape, cfg.n_points, cloud_seed, truth)?
                .cropped(keep_fraction, seed::derive(cloud_seed, "crop"))?;
            register_pair(&pair, net)
        })();
        trial_rows(study, trial, cloud_seed, &param(BUCKETS[b]), result)
    })
}

/// `net` is required in learned mode and ignored in oracle mode.
pub fn run_misalignment_sweep(
    cfg: &ExperimentConfig,
    net: Option<&FeatureNet>,
) -> Result<StudyOutput> {
    cfg.validate()?;
    let net = require_net(cfg, net)?;
    Ok(StudyOutput::new(STUDY, bucket_rows(cfg, STUDY, 1.0, net))
        .with_note("translation", "zero")
        .with_note("correspondence", cfg.mode.to_string()))
}
