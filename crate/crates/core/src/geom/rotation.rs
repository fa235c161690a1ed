use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Elementwise tolerance on `RᵀR = I` and `det R = 1` when validating input rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

/// Axis-angle vector: direction is the rotation axis, norm the angle in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationVector(pub Vector3<f64>);

impl RotationVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vector3::new(x, y, z))
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        Self(axis.normalize() * angle)
    }

    pub fn angle(&self) -> f64 {
        self.0.norm()
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        rotvec_to_matrix(self)
    }
}

impl fmt::Display for RotationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0.x, self.0.y, self.0.z)
    }
}

#[inline]
fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues' formula. The zero vector maps to the identity.
pub fn rotvec_to_matrix(v: &RotationVector) -> Matrix3<f64> {
    let theta = v.0.norm();
    let k = skew(&v.0);
    // a = sin θ / θ, b = (1 - cos θ) / θ², both with series fallbacks near zero.
    let (a, b) = if theta < 1e-6 {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0)
    } else {
        let half = (0.5 * theta).sin() / theta;
        (theta.sin() / theta, 2.0 * half * half)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Fails unless `r` is orthonormal with determinant +1 to within [`ROTATION_TOLERANCE`].
pub fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::NotARotation("non-finite entry".into()));
    }
    let ortho = (r.transpose() * r - Matrix3::identity()).amax();
    if ortho > ROTATION_TOLERANCE {
        return Err(Error::NotARotation(format!("|RᵀR - I|max = {ortho:e}")));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ROTATION_TOLERANCE {
        return Err(Error::NotARotation(format!("det = {det}")));
    }
    Ok(())
}

/// `(R - Rᵀ)` packed as a vector; equals `2 sin θ · axis`.
#[inline]
fn antisym(r: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    )
}

/// Angle of a rotation matrix in radians, in `[0, π]`.
///
/// Uses `atan2(|R - Rᵀ|, tr R - 1)`, which stays accurate near both 0 and π
/// where `acos` of the trace loses half the significant digits.
pub fn geodesic_angle(r: &Matrix3<f64>) -> f64 {
    let s = antisym(r).norm();
    let c = r.trace() - 1.0;
    s.atan2(c)
}

/// Inverse of [`rotvec_to_matrix`], returning an angle in `[0, π]`.
///
/// Away from π the axis comes from the antisymmetric part. Near π that part
/// vanishes, so the axis is taken from the rank-one symmetric part
/// `(R + Rᵀ)/2 - cos θ I = (1 - cos θ) a aᵀ`; its sign follows the
/// antisymmetric part when that is still informative, otherwise the first
/// nonzero component is made positive.
pub fn matrix_to_rotvec(r: &Matrix3<f64>) -> Result<RotationVector> {
    check_rotation(r)?;
    let w = antisym(r);
    let s = 0.5 * w.norm();
    let c = 0.5 * (r.trace() - 1.0);
    let theta = s.atan2(c);
    if theta < 1e-6 {
        return Ok(RotationVector(w * (0.5 * (1.0 + theta * theta / 6.0))));
    }
    if c > -0.9 {
        return Ok(RotationVector(w * (theta / (2.0 * s))));
    }
    let sym = (r + r.transpose()) * 0.5 - Matrix3::identity() * c;
    let col = (0..3)
        .max_by(|&a, &b| sym[(a, a)].total_cmp(&sym[(b, b)]))
        .unwrap_or(0);
    let mut axis = sym.column(col).into_owned().normalize();
    let proj = axis.dot(&w);
    if proj.abs() > 1e-12 {
        if proj < 0.0 {
            axis = -axis;
        }
    } else if let Some(first) = axis.iter().copied().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            axis = -axis;
        }
    }
    Ok(RotationVector(axis * theta))
}

/// Intrinsic Z-Y-X Euler angles `(yaw, pitch, roll)` in radians with
/// `R = Rz(yaw) · Ry(pitch) · Rx(roll)`.
///
/// At gimbal lock (`|pitch| = π/2`) roll is set to zero.
pub fn euler_zyx(r: &Matrix3<f64>) -> Vector3<f64> {
    let sp = (-r[(2, 0)]).clamp(-1.0, 1.0);
    let pitch = sp.asin();
    if (1.0 - sp.abs()) < 1e-12 {
        let yaw = (-r[(0, 1)]).atan2(r[(1, 1)]);
        return Vector3::new(yaw, pitch, 0.0);
    }
    let yaw = r[(1, 0)].atan2(r[(0, 0)]);
    let roll = r[(2, 1)].atan2(r[(2, 2)]);
    Vector3::new(yaw, pitch, roll)
}

/// `x ↦ R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Validated constructor.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        check_rotation(&rotation)?;
        if translation.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("translation".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_rotvec(v: &RotationVector, translation: Vector3<f64>) -> Self {
        Self {
            rotation: rotvec_to_matrix(v),
            translation,
        }
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn rotvec(&self) -> Result<RotationVector> {
        matrix_to_rotvec(&self.rotation)
    }

    /// Row-major rotation followed by translation.
    pub fn to_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.x,
            t.y,
            t.z,
        ]
    }
}

/// Random rigid misalignment: axis uniform on the sphere, angle uniform in
/// `[-theta0, theta0]`, each translation component uniform in `[-t_bound, t_bound]`.
///
/// Uniform angle with uniform axis is not the Haar measure on SO(3); small
/// angles are over-represented relative to it.
pub fn sample_misalignment<R: Rng + ?Sized>(
    rng: &mut R,
    theta0: f64,
    t_bound: f64,
) -> RigidTransform {
    debug_assert!((0.0..=PI).contains(&theta0));
    debug_assert!(t_bound >= 0.0);
    let axis = random_unit_vector(rng);
    let angle = theta0 * (2.0 * rng.random::<f64>() - 1.0);
    let mut t = Vector3::zeros();
    for c in t.iter_mut() {
        *c = t_bound * (2.0 * rng.random::<f64>() - 1.0);
    }
    RigidTransform::from_rotvec(&RotationVector(axis * angle), t)
}

/// Uniform direction on the unit sphere from a normalized Gaussian draw.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}
