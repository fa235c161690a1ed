use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, Vector3};
use rand::Rng;

use super::rotation::{random_unit_vector, RigidTransform};
use crate::{Error, Result};

/// Ordered set of 3D points. Index order is point identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
}

impl PointCloud {
    /// Rejects empty input and non-finite coordinates.
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFinite(format!("point {i}")));
        }
        Ok(Self { points })
    }

    pub fn from_slices(points: &[[f64; 3]]) -> Result<Self> {
        Self::new(
            points
                .iter()
                .map(|p| Vector3::new(p[0], p[1], p[2]))
                .collect(),
        )
    }

    /// Columns of a 3×N matrix.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "expected 3 rows, got {}",
                m.nrows()
            )));
        }
        Self::new(
            m.column_iter()
                .map(|c| Vector3::new(c[0], c[1], c[2]))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Vector3<f64>> {
        self.points.iter()
    }

    pub fn into_points(self) -> Vec<Vector3<f64>> {
        self.points
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.points.iter().sum::<Vector3<f64>>() / self.points.len() as f64
    }

    /// 3×N matrix with one point per column.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(3, self.points.len(), |r, c| self.points[c][r])
    }

    /// Points reordered so that output `i` is input `order[i]`.
    pub fn select(&self, order: &[usize]) -> Result<Self> {
        if let Some(&bad) = order.iter().find(|&&i| i >= self.points.len()) {
            return Err(Error::InvalidArgument(format!("index {bad} out of range")));
        }
        Self::new(order.iter().map(|&i| self.points[i]).collect())
    }

    /// `R x_i + t` for every point, order preserved.
    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            points: self.points.iter().map(|p| t.apply_point(p)).collect(),
        }
    }
}

impl std::ops::Index<usize> for PointCloud {
    type Output = Vector3<f64>;

    fn index(&self, i: usize) -> &Vector3<f64> {
        &self.points[i]
    }
}

impl<'a> IntoIterator for &'a PointCloud {
    type Item = &'a Vector3<f64>;
    type IntoIter = std::slice::Iter<'a, Vector3<f64>>;

    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

/// Survivors of a planar crop together with their indices in the original cloud.
#[derive(Debug, Clone)]
pub struct PartialCrop {
    pub cloud: PointCloud,
    /// Ascending indices into the uncropped cloud.
    pub indices: Vec<usize>,
    /// Unit normal of the cut plane; survivors lie on its positive side.
    pub normal: Vector3<f64>,
    /// Smallest signed distance among the survivors.
    pub threshold: f64,
}

/// Keeps the points with the largest signed distance along a random unit
/// normal of a plane through the centroid, discarding those farthest on the
/// other side.
///
/// The survivor count is `keep_fraction · N` rounded to the nearest integer
/// (512 → 358, 1024 → 717 at 0.7). Ties go to the lower index, and survivors
/// keep their original relative order.
pub fn crop_partial<R: Rng + ?Sized>(
    x: &PointCloud,
    keep_fraction: f64,
    rng: &mut R,
) -> Result<PartialCrop> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep_fraction {keep_fraction} outside (0, 1]"
        )));
    }
    let n = x.len();
    let keep = (keep_fraction * n as f64).round() as usize;
    if keep < 3 {
        return Err(Error::InvalidArgument(format!(
            "crop keeps {keep} of {n} points, need at least 3"
        )));
    }
    let normal = random_unit_vector(rng);
    let centroid = x.centroid();
    let signed: Vec<f64> = x.iter().map(|p| (p - centroid).dot(&normal)).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| signed[b].total_cmp(&signed[a]).then(a.cmp(&b)));
    let mut indices = order[..keep].to_vec();
    indices.sort_unstable();
    let threshold = indices
        .iter()
        .map(|&i| signed[i])
        .fold(f64::INFINITY, f64::min);
    Ok(PartialCrop {
        cloud: x.select(&indices)?,
        indices,
        normal,
        threshold,
    })
}

/// Reads an ASCII XYZ file: three whitespace-separated numbers per line,
/// blank lines and `#` comments ignored.
pub fn load_xyz(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(
                i + 1,
                format!("expected 3 values, found {}", fields.len()),
            ));
        }
        let mut p = [0.0; 3];
        for (slot, field) in p.iter_mut().zip(&fields) {
            *slot = field
                .parse::<f64>()
                .map_err(|e| parse_err(i + 1, format!("{field:?}: {e}")))?;
            if !slot.is_finite() {
                return Err(parse_err(i + 1, format!("non-finite value {field:?}")));
            }
        }
        points.push(Vector3::new(p[0], p[1], p[2]));
    }
    if points.is_empty() {
        return Err(parse_err(0, "no points".into()));
    }
    PointCloud::new(points)
}

/// Writes one point per line in plain decimal notation. Rust's shortest
/// round-trip formatting makes the values reload bit-exactly.
pub fn save_xyz(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(w, "# {} points", cloud.len())?;
        for p in cloud {
            writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}
