//! Training the feature network with per-epoch held-out curves.

use corrmatch_core::learn::{
    evaluate, train_epoch, EpochMetrics, EvalMetrics, FeatureNet, Sample, TrainState,
};
use corrmatch_core::seed;

use crate::config::ExperimentConfig;
use crate::data::dataset;
use crate::report::{Row, StudyOutput, Value};
use crate::Result;

pub const STUDY: &str = "train";

#[derive(Debug)]
pub struct TrainingRun {
    /// The network before the first update, with its input scaling fitted.
    pub initial: FeatureNet,
    pub initial_eval: EvalMetrics,
    /// Last network whose epoch finished with finite parameters.
    pub net: FeatureNet,
    pub epochs: Vec<(EpochMetrics, EvalMetrics)>,
    /// The error that stopped training early, if any.
    pub failure: Option<corrmatch_core::Error>,
}

/// Seeded initialization, input scaling fitted on the training descriptors,
/// then `cfg.epochs` passes with a held-out evaluation after each.
pub fn train_network(
    cfg: &ExperimentConfig,
    train: &[Sample],
    heldout: &[Sample],
) -> Result<TrainingRun> {
    let mut net = FeatureNet::new(cfg.net_config(), &mut seed::child_rng(cfg.seed, "init"));
    net.fit_input_normalization(train.iter().flat_map(|s| {
        let (dx, dy) = s.descriptors();
        [dx, dy]
    }));
    let (initial_eval, _) = evaluate(&net, heldout)?;
    let mut state = TrainState::new(
        net.clone(),
        cfg.adam_config(),
        seed::derive(cfg.seed, "epoch-order"),
    );
    let mut run = TrainingRun {
        initial: net,
        initial_eval,
        net: state.net.clone(),
        epochs: Vec::new(),
        failure: None,
    };
    for _ in 0..cfg.epochs {
        let outcome =
            train_epoch(&mut state, train).and_then(|m| Ok((m, evaluate(&state.net, heldout)?.0)));
        match outcome {
            Ok(pair) => {
                run.net = state.net.clone();
                run.epochs.push(pair);
            }
            Err(e) => {
                run.failure = Some(e);
                break;
            }
        }
    }
    Ok(run)
}

pub(crate) fn epoch_rows(study: &'static str, seed: u64, run: &TrainingRun) -> Vec<Row> {
    let mut rows = Vec::new();
    for (train, held) in &run.epochs {
        let metrics = [
            ("train_loss", train.metrics.loss),
            ("train_accuracy", train.metrics.accuracy),
            ("loss", held.loss),
            ("accuracy", held.accuracy),
            ("geodesic_deg", held.geodesic_deg),
            ("euler_mae_deg", held.euler_mae_deg),
            ("euler_rmse_deg", held.euler_rmse_deg),
            ("translation_rmse", held.translation_rmse),
            ("chamfer", held.chamfer),
        ];
        for (metric, v) in metrics {
            rows.push(Row {
                study,
                trial: train.epoch,
                seed,
                param: format!("epoch={}", train.epoch),
                metric: metric.into(),
                value: Value::Number(v),
            });
        }
    }
    rows
}

/// Trains on `train_clouds` pairs and evaluates on `test_clouds` held-out
/// pairs after every epoch. Held-out metrics are unprefixed; training-set
/// metrics are measured before each batch's update.
pub fn run_training(cfg: &ExperimentConfig) -> Result<(StudyOutput, TrainingRun)> {
    cfg.validate()?;
    let train = dataset(cfg, "train", cfg.train_clouds, 1.0)?;
    let heldout = dataset(cfg, "heldout", cfg.test_clouds, 1.0)?;
    let run = train_network(cfg, &train, &heldout)?;
    let out = StudyOutput::new(STUDY, epoch_rows(STUDY, cfg.seed, &run))
        .with_note("initial_heldout_loss", run.initial_eval.loss.to_string())
        .with_note(
            "initial_heldout_accuracy",
            run.initial_eval.accuracy.to_string(),
        );
    Ok((out, run))
}
