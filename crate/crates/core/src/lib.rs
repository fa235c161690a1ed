//! Rigid point-cloud registration built around correspondence matrices.
//!
//! Correspondence estimation is treated as multi-class classification: every
//! source point is a sample and every target point a class. The crate provides
//! the pieces needed to go from two clouds to a pose through that lens:
//!
//! - [`geom`]: point clouds, rigid transforms, rotation vectors, misalignment
//!   sampling, synthetic shapes and the evaluation metrics.
//! - [`correspondence`]: hard, soft and outlier-augmented correspondence
//!   matrices, the outlier embedding and Sinkhorn refinement.
//! - [`align`]: closed-form (SVD) rigid alignment from correspondences, its
//!   weighted and outlier-weighted forms, and an ICP baseline.
//! - [`learn`]: rotation-invariant point descriptors, a small feature MLP,
//!   the cross-entropy correspondence loss with its analytic gradient and an
//!   Adam training loop.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod correspondence;
mod error;
pub mod geom;
pub mod learn;
pub mod seed;

pub use error::{Error, Result};
