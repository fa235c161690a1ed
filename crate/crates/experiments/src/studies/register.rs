//! One-shot registration of two XYZ files with a trained network.

use std::path::Path;

use corrmatch_core::align::weighted_align;
use corrmatch_core::correspondence::soft_correspondence;
use corrmatch_core::geom::{load_xyz, RigidTransform};
use corrmatch_core::learn::{featurize, FeatureNet};

use crate::Result;

/// Transform taking `source` onto `target`.
pub fn register_files(source: &Path, target: &Path, checkpoint: &Path) -> Result<RigidTransform> {
    let net = FeatureNet::load(checkpoint)?;
    let x = load_xyz(source)?;
    let y = load_xyz(target)?;
    let c = soft_correspondence(&featurize(&net, &x)?, &featurize(&net, &y)?)?;
    Ok(weighted_align(&x, &y, &c)?.transform)
}

/// Twelve numbers on one line: `R` row-major, then `t`.
pub fn format_transform(t: &RigidTransform) -> String {
    t.to_row_major()
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}
