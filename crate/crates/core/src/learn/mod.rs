//! Learning correspondences as multi-class classification.
//!
//! Each source point is a sample and each target point a class. A shared
//! feature network embeds both clouds, the bilinear logits `F_Yᵀ F_X` are
//! scored against the ground-truth correspondence with cross-entropy, and the
//! gradient flows back through both towers by hand-written backprop.

mod descriptors;
mod loss;
mod net;
mod train;

pub use descriptors::{point_descriptors, DESCRIPTOR_DIM};
pub use loss::{cross_entropy_grad, cross_entropy_loss, dcp_loss, rpmnet_reg_loss, CrossEntropy};
pub use net::{featurize, Dense, FeatureNet, NetConfig, CHECKPOINT_FORMAT};
pub use train::{
    evaluate, evaluate_sample, sample_gradient, train_epoch, AdamConfig, EpochMetrics, EvalMetrics,
    Sample, SampleEval, SampleOutcome, TrainState,
};
