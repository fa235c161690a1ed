//! Synthetic shapes standing in for CAD-model samples.
//!
//! Every generator is deterministic in its RNG, centers the result on its
//! centroid and scales it so the farthest point lies on the unit sphere.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::Rng;

use super::PointCloud;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    /// Volume samples of a bent, anisotropic ellipsoid. No symmetry at all.
    AsymmetricBlob,
    /// Surface samples of a 1.0 × 0.7 × 0.45 box. The underlying surface has
    /// the box's discrete symmetries; the random sample does not.
    BoxSurface,
    /// Conical helix of 2.5 turns with randomly spaced points along it.
    Helix,
    /// Volume samples of an L-shaped bracket with unequal arms. The solid has
    /// a mirror plane but no proper rotational symmetry.
    LBracket,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [
        ShapeKind::AsymmetricBlob,
        ShapeKind::BoxSurface,
        ShapeKind::Helix,
        ShapeKind::LBracket,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::AsymmetricBlob => "asymmetric-blob",
            ShapeKind::BoxSurface => "box-surface",
            ShapeKind::Helix => "helix",
            ShapeKind::LBracket => "L-bracket",
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown shape kind {s:?}")))
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn in_unit_ball<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let p = Vector3::new(
            uniform(rng, -1.0, 1.0),
            uniform(rng, -1.0, 1.0),
            uniform(rng, -1.0, 1.0),
        );
        if p.norm_squared() <= 1.0 {
            return p;
        }
    }
}

fn in_box<R: Rng + ?Sized>(rng: &mut R, lo: Vector3<f64>, hi: Vector3<f64>) -> Vector3<f64> {
    Vector3::new(
        uniform(rng, lo.x, hi.x),
        uniform(rng, lo.y, hi.y),
        uniform(rng, lo.z, hi.z),
    )
}

fn normalize(mut points: Vec<Vector3<f64>>) -> Result<PointCloud> {
    let c = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
    let r = points.iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
    let scale = if r > 0.0 { 1.0 / r } else { 1.0 };
    for p in &mut points {
        *p = (*p - c) * scale;
    }
    PointCloud::new(points)
}

/// `n ≥ 8` points of the given shape.
pub fn generate_shape<R: Rng + ?Sized>(
    kind: ShapeKind,
    n: usize,
    rng: &mut R,
) -> Result<PointCloud> {
    if n < 8 {
        return Err(Error::InvalidArgument(format!(
            "shape needs n >= 8, got {n}"
        )));
    }
    let points: Vec<Vector3<f64>> = match kind {
        ShapeKind::AsymmetricBlob => (0..n)
            .map(|_| {
                let p = in_unit_ball(rng).component_mul(&Vector3::new(1.0, 0.65, 0.4));
                Vector3::new(
                    p.x + 0.35 * p.y * p.y,
                    p.y,
                    p.z + 0.25 * p.x * p.y + 0.1 * p.x * p.x,
                )
            })
            .collect(),
        ShapeKind::BoxSurface => {
            let d = Vector3::new(1.0, 0.7, 0.45);
            let areas = [
                d.y * d.z,
                d.y * d.z,
                d.x * d.z,
                d.x * d.z,
                d.x * d.y,
                d.x * d.y,
            ];
            let total: f64 = areas.iter().sum();
            (0..n)
                .map(|_| {
                    let mut pick = rng.random::<f64>() * total;
                    let face = areas
                        .iter()
                        .position(|&a| {
                            pick -= a;
                            pick < 0.0
                        })
                        .unwrap_or(5);
                    let mut p = in_box(rng, -d * 0.5, d * 0.5);
                    let axis = face / 2;
                    p[axis] = if face % 2 == 0 { -0.5 } else { 0.5 } * d[axis];
                    p
                })
                .collect()
        }
        ShapeKind::Helix => {
            let mut ts: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            ts.sort_by(f64::total_cmp);
            ts.into_iter()
                .map(|t| {
                    let phi = 2.0 * PI * 2.5 * t;
                    let r = 0.25 + 0.35 * t;
                    Vector3::new(r * phi.cos(), r * phi.sin(), 1.2 * t - 0.6)
                })
                .collect()
        }
        ShapeKind::LBracket => {
            let (a_lo, a_hi) = (Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.25, 0.4));
            let (b_lo, b_hi) = (Vector3::new(0.0, 0.25, 0.0), Vector3::new(0.25, 0.8, 0.4));
            let va = (a_hi - a_lo).product();
            let vb = (b_hi - b_lo).product();
            (0..n)
                .map(|_| {
                    if rng.random::<f64>() * (va + vb) < va {
                        in_box(rng, a_lo, a_hi)
                    } else {
                        in_box(rng, b_lo, b_hi)
                    }
                })
                .collect()
        }
    };
    normalize(points)
}

/// `n` points uniform in the axis-aligned unit cube centered at the origin.
pub fn unit_cube_cloud<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PointCloud {
    let lo = Vector3::repeat(-0.5);
    let hi = Vector3::repeat(0.5);
    let pts = (0..n.max(1)).map(|_| in_box(rng, lo, hi)).collect();
    PointCloud::new(pts).expect("finite, nonempty")
}
