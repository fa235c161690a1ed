//! Controlled corruption of correspondences and rotation vectors.

use corrmatch_core::correspondence::{hard_assign, CorrespondenceMatrix, Match};
use corrmatch_core::geom::{random_unit_vector, RotationVector};
use corrmatch_core::{Error, Result};
use rand::seq::index::sample;
use rand::Rng;

/// Number of columns [`corrupt_correspondence`] rewrites: `⌊p·N_x/100⌋`.
pub fn corrupted_count(p: f64, n_sources: usize) -> usize {
    (p * n_sources as f64 / 100.0).floor() as usize
}

/// Picks `⌊p·N_x/100⌋` distinct columns uniformly and moves each one's match
/// to a uniformly chosen different target.
pub fn corrupt_correspondence<R: Rng + ?Sized>(
    c_star: &CorrespondenceMatrix,
    p: f64,
    rng: &mut R,
) -> Result<CorrespondenceMatrix> {
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "corruption {p}% outside [0, 100]"
        )));
    }
    if !c_star.is_hard() || c_star.is_outlier_augmented() {
        return Err(Error::InvalidArgument(
            "corruption needs a hard, non-augmented matrix".into(),
        ));
    }
    let ny = c_star.n_targets();
    let nx = c_star.n_sources();
    let k = corrupted_count(p, nx);
    if k > 0 && ny < 2 {
        return Err(Error::InvalidArgument(
            "corruption needs at least two targets".into(),
        ));
    }
    let mut idx: Vec<usize> = hard_assign(c_star)
        .into_iter()
        .map(|m| m.target().expect("non-augmented"))
        .collect();
    for col in sample(rng, nx, k) {
        // Uniform over the other ny − 1 targets.
        let r = rng.random_range(0..ny - 1);
        idx[col] = if r >= idx[col] { r + 1 } else { r };
    }
    let matches: Vec<Match> = idx.into_iter().map(Match::Target).collect();
    CorrespondenceMatrix::from_matches(&matches, ny, false)
}

/// `v* + (p/100)·‖v*‖·u` with `u` uniform on the sphere.
pub fn corrupt_rotation<R: Rng + ?Sized>(
    v_star: &RotationVector,
    p: f64,
    rng: &mut R,
) -> Result<RotationVector> {
    if !(p >= 0.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "corruption {p}% must be finite and >= 0"
        )));
    }
    if p == 0.0 {
        return Ok(*v_star);
    }
    let norm = v_star.0.norm();
    if norm == 0.0 {
        return Err(Error::Degenerate);
    }
    let u = random_unit_vector(rng);
    Ok(RotationVector(v_star.0 + u * (p / 100.0 * norm)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use corrmatch_core::correspondence::correspondence_accuracy;
    use corrmatch_core::geom::{rotation_error, RotationMetric};
    use corrmatch_core::seed;
    use std::f64::consts::PI;

    fn identity(n: usize) -> CorrespondenceMatrix {
        CorrespondenceMatrix::from_indices(&(0..n).collect::<Vec<_>>(), n).unwrap()
    }

    #[test]
    fn zero_corruption_is_identity() {
        let c = identity(10);
        assert_eq!(
            corrupt_correspondence(&c, 0.0, &mut seed::rng(1)).unwrap(),
            c
        );
        let v = RotationVector::new(0.1, 0.2, 0.3);
        assert_eq!(corrupt_rotation(&v, 0.0, &mut seed::rng(1)).unwrap(), v);
    }

    #[test]
    fn full_corruption_moves_every_column() {
        let c = identity(30);
        let out = corrupt_correspondence(&c, 100.0, &mut seed::rng(2)).unwrap();
        assert!(out.is_hard());
        for (a, b) in hard_assign(&out).iter().zip(hard_assign(&c)) {
            assert_ne!(*a, b);
        }
    }

    #[test]
    fn changed_column_count_is_floor() {
        let mut rng = seed::rng(3);
        for n in [7usize, 10, 33, 64] {
            let c = identity(n);
            for p in [0.0, 5.0, 12.5, 40.0, 99.0, 100.0] {
                let out = corrupt_correspondence(&c, p, &mut rng).unwrap();
                let changed = hard_assign(&out)
                    .iter()
                    .zip(hard_assign(&c))
                    .filter(|(a, b)| **a != *b)
                    .count();
                let expect = (p * n as f64 / 100.0).floor() as usize;
                assert_eq!(changed, expect, "n {n} p {p}");
                let acc = correspondence_accuracy(&out, &c).unwrap();
                assert!((acc - (100.0 - p)).abs() <= 100.0 / n as f64 + 1e-9);
            }
        }
    }

    #[test]
    fn resampled_targets_are_uniform_over_the_rest() {
        let c = CorrespondenceMatrix::from_indices(&[2], 5).unwrap();
        let mut rng = seed::rng(4);
        let mut counts = [0usize; 5];
        for _ in 0..20_000 {
            let out = corrupt_correspondence(&c, 100.0, &mut rng).unwrap();
            counts[hard_assign(&out)[0].target().unwrap()] += 1;
        }
        assert_eq!(counts[2], 0);
        for (j, &n) in counts.iter().enumerate().filter(|(j, _)| *j != 2) {
            assert!((n as f64 / 5000.0 - 1.0).abs() < 0.05, "target {j}: {n}");
        }
    }

    #[test]
    fn single_target_cannot_be_corrupted() {
        let c = CorrespondenceMatrix::from_indices(&[0, 0, 0], 1).unwrap();
        assert!(corrupt_correspondence(&c, 50.0, &mut seed::rng(5)).is_err());
        assert!(corrupt_correspondence(&c, 10.0, &mut seed::rng(5)).is_ok());
    }

    #[test]
    fn rotation_offset_has_exact_norm() {
        let mut rng = seed::rng(6);
        for p in [1.0, 10.0, 50.0, 100.0, 250.0] {
            let v = RotationVector::new(0.3, -1.2, 0.4);
            let out = corrupt_rotation(&v, p, &mut rng).unwrap();
            assert!(((out.0 - v.0).norm() - p / 100.0 * v.0.norm()).abs() < 1e-12);
        }
        assert!(matches!(
            corrupt_rotation(&RotationVector::new(0.0, 0.0, 0.0), 5.0, &mut rng),
            Err(Error::Degenerate)
        ));
    }

    #[test]
    fn full_rotation_corruption_error_is_at_most_the_angle() {
        // ‖v_pert − v*‖ = π/2, so the relative rotation is at most 90° away.
        let v = RotationVector::new(PI / 2.0, 0.0, 0.0);
        let r = v.to_matrix();
        let mut rng = seed::rng(7);
        let mut max = 0.0f64;
        for _ in 0..10_000 {
            let pert = corrupt_rotation(&v, 100.0, &mut rng).unwrap();
            let e = rotation_error(&pert.to_matrix(), &r, RotationMetric::Geodesic).unwrap();
            assert!(e <= 90.0 + 1e-9);
            max = max.max(e);
        }
        assert!(max > 85.0, "{max}");
    }
}
