use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::descriptors::point_descriptors;
use super::loss::{cross_entropy_grad, cross_entropy_loss, CrossEntropy};
use super::net::FeatureNet;
use crate::align::weighted_align;
use crate::correspondence::{
    column_softmax, correspondence_accuracy, ground_truth_correspondence, Assignment,
    CorrespondenceMatrix,
};
use crate::geom::{chamfer_distance, rotation_error, PointCloud, RigidTransform, RotationMetric};
use crate::seed;
use crate::{Error, Result};

/// A training or evaluation pair with its hard target and cached descriptors.
#[derive(Debug, Clone)]
pub struct Sample {
    pub x: PointCloud,
    pub y: PointCloud,
    pub c_star: CorrespondenceMatrix,
    /// Transform taking `x` into the frame of `y`.
    pub truth: RigidTransform,
    knn_k: usize,
    dx: DMatrix<f64>,
    dy: DMatrix<f64>,
}

impl Sample {
    /// Builds `C*` by nearest neighbour after moving `x` with `truth`.
    pub fn new(x: PointCloud, y: PointCloud, truth: RigidTransform, knn_k: usize) -> Result<Self> {
        let c_star = ground_truth_correspondence(&x.transformed(&truth), &y)?;
        Self::with_target(x, y, truth, c_star, knn_k)
    }

    pub fn with_target(
        x: PointCloud,
        y: PointCloud,
        truth: RigidTransform,
        c_star: CorrespondenceMatrix,
        knn_k: usize,
    ) -> Result<Self> {
        if c_star.n_sources() != x.len()
            || c_star.n_targets() != y.len()
            || c_star.is_outlier_augmented()
        {
            return Err(Error::ShapeMismatch(format!(
                "target {:?} for clouds {}→{}",
                c_star.entries().shape(),
                x.len(),
                y.len()
            )));
        }
        let dx = point_descriptors(&x, knn_k)?;
        let dy = point_descriptors(&y, knn_k)?;
        Ok(Self {
            x,
            y,
            c_star,
            truth,
            knn_k,
            dx,
            dy,
        })
    }

    pub fn descriptors(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        (&self.dx, &self.dy)
    }

    fn check(&self, net: &FeatureNet) -> Result<()> {
        if self.knn_k != net.knn_k {
            return Err(Error::ShapeMismatch(format!(
                "sample descriptors use k = {}, network expects {}",
                self.knn_k, net.knn_k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 4,
            epochs: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub net: FeatureNet,
    /// Adam moments, in [`FeatureNet::params_flat`] order.
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub epoch: usize,
    pub seed: u64,
    pub config: AdamConfig,
}

impl TrainState {
    pub fn new(net: FeatureNet, config: AdamConfig, seed: u64) -> Self {
        let n = net.num_params();
        Self {
            net,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            epoch: 0,
            seed,
            config,
        }
    }

    fn adam_step(&mut self, grad: &[f64]) -> Result<()> {
        let c = self.config;
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let mut params = self.net.params_flat();
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            *p -= c.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + c.epsilon);
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!(
                "parameters after step {}",
                self.step
            )));
        }
        self.net.set_params_flat(&params)
    }
}

/// Loss, logits and parameter gradient for one sample.
#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub loss: CrossEntropy,
    /// `F_Yᵀ F_X`.
    pub logits: DMatrix<f64>,
    /// Gradient of the per-point mean loss, in [`FeatureNet::params_flat`] order.
    pub grad: Vec<f64>,
}

/// Backpropagates the mean cross-entropy through the bilinear logits and
/// both (weight-shared) towers.
pub fn sample_gradient(net: &FeatureNet, sample: &Sample) -> Result<SampleOutcome> {
    sample.check(net)?;
    let cx = net.forward(&sample.dx)?;
    let cy = net.forward(&sample.dy)?;
    let (fx, fy) = (cx.output(), cy.output());
    let logits = fy.tr_mul(fx);
    let loss = cross_entropy_loss(&logits, &sample.c_star)?;
    if !loss.total.is_finite() {
        return Err(Error::NonFinite(format!(
            "cross-entropy loss {}",
            loss.total
        )));
    }
    let g = cross_entropy_grad(&logits, &sample.c_star)? / sample.x.len() as f64;
    let d_fx = fy * &g;
    let d_fy = fx * g.transpose();
    let gx = net.backward(&cx, &d_fx);
    let gy = net.backward(&cy, &d_fy);
    let mut grad = Vec::with_capacity(net.num_params());
    for (a, b) in gx.iter().zip(&gy) {
        grad.extend(a.weight.iter().zip(b.weight.iter()).map(|(p, q)| p + q));
        grad.extend(a.bias.iter().zip(b.bias.iter()).map(|(p, q)| p + q));
    }
    Ok(SampleOutcome { loss, logits, grad })
}

/// Registration quality of one sample given its logits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleEval {
    pub loss: f64,
    /// Percent of source points whose argmax matches `C*`.
    pub accuracy: f64,
    pub geodesic_deg: f64,
    pub euler_mae_deg: f64,
    pub euler_rmse_deg: f64,
    pub translation_error: f64,
    pub chamfer: f64,
}

fn score(sample: &Sample, logits: &DMatrix<f64>, loss: f64) -> Result<SampleEval> {
    let c = CorrespondenceMatrix::new(column_softmax(logits), Assignment::Soft, false)?;
    let aligned = weighted_align(&sample.x, &sample.y, &c)?;
    let t = &aligned.transform;
    let r_true = &sample.truth.rotation;
    Ok(SampleEval {
        loss,
        accuracy: correspondence_accuracy(&c, &sample.c_star)?,
        geodesic_deg: rotation_error(&t.rotation, r_true, RotationMetric::Geodesic)?,
        euler_mae_deg: rotation_error(&t.rotation, r_true, RotationMetric::EulerMae)?,
        euler_rmse_deg: rotation_error(&t.rotation, r_true, RotationMetric::EulerRmse)?,
        translation_error: (t.translation - sample.truth.translation).norm(),
        chamfer: chamfer_distance(&sample.x.transformed(t), &sample.y),
    })
}

/// Forward pass, loss and weighted alignment for one sample.
pub fn evaluate_sample(net: &FeatureNet, sample: &Sample) -> Result<SampleEval> {
    sample.check(net)?;
    let fx = net.forward(&sample.dx)?;
    let fy = net.forward(&sample.dy)?;
    let logits = fy.output().tr_mul(fx.output());
    let loss = cross_entropy_loss(&logits, &sample.c_star)?;
    score(sample, &logits, loss.mean)
}

/// Means over a set of samples; translation is an RMSE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub loss: f64,
    pub accuracy: f64,
    pub geodesic_deg: f64,
    pub euler_mae_deg: f64,
    pub euler_rmse_deg: f64,
    pub translation_rmse: f64,
    pub chamfer: f64,
}

impl EvalMetrics {
    pub fn aggregate(evals: &[SampleEval]) -> Self {
        let n = evals.len().max(1) as f64;
        let mean = |f: fn(&SampleEval) -> f64| evals.iter().map(f).sum::<f64>() / n;
        Self {
            loss: mean(|e| e.loss),
            accuracy: mean(|e| e.accuracy),
            geodesic_deg: mean(|e| e.geodesic_deg),
            euler_mae_deg: mean(|e| e.euler_mae_deg),
            euler_rmse_deg: mean(|e| e.euler_rmse_deg),
            translation_rmse: mean(|e| e.translation_error * e.translation_error).sqrt(),
            chamfer: mean(|e| e.chamfer),
        }
    }
}

/// Scores `net` on every sample. Samples are independent and run in parallel;
/// the result does not depend on the thread count.
pub fn evaluate(net: &FeatureNet, samples: &[Sample]) -> Result<(EvalMetrics, Vec<SampleEval>)> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no evaluation samples".into()));
    }
    let evals: Vec<SampleEval> = samples
        .par_iter()
        .map(|s| evaluate_sample(net, s))
        .collect::<Result<_>>()?;
    Ok((EvalMetrics::aggregate(&evals), evals))
}

/// Training-set metrics for one epoch, measured on each batch before its update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub metrics: EvalMetrics,
}

/// One pass over `dataset` in a seeded order. Batch gradients are computed in
/// parallel, summed in sample order and applied as a single Adam step.
pub fn train_epoch(state: &mut TrainState, dataset: &[Sample]) -> Result<EpochMetrics> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if state.config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be ≥ 1".into()));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut seed::rng(seed::derive_indexed(
        state.seed,
        "epoch-order",
        state.epoch as u64,
    )));

    let n_params = state.net.num_params();
    let mut evals = Vec::with_capacity(dataset.len());
    for batch in order.chunks(state.config.batch_size) {
        let net = &state.net;
        let outcomes: Vec<(SampleOutcome, SampleEval)> = batch
            .par_iter()
            .map(|&i| {
                let out = sample_gradient(net, &dataset[i])?;
                let eval = score(&dataset[i], &out.logits, out.loss.mean)?;
                Ok((out, eval))
            })
            .collect::<Result<_>>()?;
        let mut grad = vec![0.0; n_params];
        for (out, eval) in &outcomes {
            for (g, o) in grad.iter_mut().zip(&out.grad) {
                *g += o;
            }
            evals.push(*eval);
        }
        let scale = 1.0 / batch.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        state.adam_step(&grad)?;
    }
    let metrics = EvalMetrics::aggregate(&evals);
    let epoch = state.epoch;
    state.epoch += 1;
    Ok(EpochMetrics { epoch, metrics })
}
