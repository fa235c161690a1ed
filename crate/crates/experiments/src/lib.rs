//! Experiment runner for correspondence-matrix registration: seeded studies
//! that write long-format CSV.
//!
//! Every random stream is derived from the config's `seed`, so a study run
//! twice with the same config produces identical data rows, whatever the
//! thread count.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod corrupt;
pub mod data;
mod error;
pub mod report;
pub mod studies;

pub use config::{ExperimentConfig, Mode};
pub use error::{Error, Result};
pub use report::{Row, StudyOutput, SummaryRow, Value};
