//! Registration with a cropped source cloud.

use corrmatch_core::learn::FeatureNet;

use super::sweep::bucket_rows;
use super::train::{epoch_rows, train_network};
use crate::config::{ExperimentConfig, Mode};
use crate::data::dataset;
use crate::report::StudyOutput;
use crate::Result;

pub const STUDY: &str = "partial";

/// The sweep's buckets with each source cropped to `keep_fraction`.
///
/// In learned mode without a network, one is first trained on cropped pairs
/// and its per-epoch curve (`param = epoch=…`) precedes the bucket rows. The
/// trained network is returned.
pub fn run_partial_experiment(
    cfg: &ExperimentConfig,
    net: Option<&FeatureNet>,
) -> Result<(StudyOutput, Option<FeatureNet>)> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut trained = None;
    let net = match (cfg.mode, net) {
        (Mode::Oracle, _) => None,
        (Mode::Learned, Some(n)) => Some(n),
        (Mode::Learned, None) => {
            let train = dataset(cfg, "partial-train", cfg.train_clouds, cfg.keep_fraction)?;
            let heldout = dataset(cfg, "partial-heldout", cfg.test_clouds, cfg.keep_fraction)?;
            let run = train_network(cfg, &train, &heldout)?;
            rows = epoch_rows(STUDY, cfg.seed, &run);
            if let Some(e) = run.failure {
                return Err(e.into());
            }
            trained = Some(run.net);
            trained.as_ref()
        }
    };
    rows.extend(bucket_rows(cfg, STUDY, cfg.keep_fraction, net));
    let out = StudyOutput::new(STUDY, rows)
        .with_note(
            "crop",
            "keeps round(keep_fraction*N) points farthest along a random direction",
        )
        .with_note("correspondence", cfg.mode.to_string());
    Ok((out, trained.clone()))
}
