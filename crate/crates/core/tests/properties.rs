//! Randomized invariants across geometry, correspondence, alignment and learning.

use corrmatch_core::align::{
    align_pairs, horn_align, icp, weighted_align, weighted_align_outlier, IcpOptions,
};
use corrmatch_core::correspondence::*;
use corrmatch_core::geom::*;
use corrmatch_core::learn::*;
use corrmatch_core::seed;
use nalgebra::{DMatrix, Vector3};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use std::f64::consts::PI;

fn shape(s: u64) -> ShapeKind {
    ShapeKind::ALL[(s % 4) as usize]
}

fn cloud(s: u64, n: usize) -> PointCloud {
    generate_shape(shape(s), n, &mut seed::rng(s)).unwrap()
}

fn random_matrix(rng: &mut seed::Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| scale * (2.0 * rng.random::<f64>() - 1.0))
}

fn column_sums_are_one(c: &CorrespondenceMatrix) -> bool {
    c.entries()
        .column_iter()
        .all(|col| (col.sum() - 1.0).abs() <= 1e-9)
}

fn small_net(s: u64, k: usize) -> FeatureNet {
    FeatureNet::new(
        NetConfig {
            knn_k: k,
            hidden: [16, 16],
            embedding_dim: 8,
        },
        &mut seed::rng(s),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // geometry

    #[test]
    fn rigid_transforms_preserve_distances(s in any::<u64>()) {
        let x = cloud(s, 30);
        let t = sample_misalignment(&mut seed::rng(s ^ 1), PI, 2.0);
        let tx = x.transformed(&t);
        prop_assert_eq!(chamfer_distance(&tx, &tx), 0.0);
        for i in 0..x.len() {
            for j in 0..i {
                let d0 = (x[i] - x[j]).norm();
                let d1 = (tx[i] - tx[j]).norm();
                prop_assert!((d0 - d1).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rotvec_round_trip(ax in -1.0..1.0f64, ay in -1.0..1.0f64, az in -1.0..1.0f64, frac in 0.0..1.0f64) {
        let axis = Vector3::new(ax, ay, az);
        prop_assume!(axis.norm() > 1e-3);
        let v = RotationVector::from_axis_angle(&axis.normalize(), frac * (PI - 1e-6));
        let back = matrix_to_rotvec(&v.to_matrix()).unwrap();
        prop_assert!((back.0 - v.0).norm() < 1e-9, "{} vs {}", back, v);
    }

    #[test]
    fn misalignment_respects_bound(s in any::<u64>(), theta in 0.0..PI) {
        let t = sample_misalignment(&mut seed::rng(s), theta, 1.0);
        prop_assert!(geodesic_angle(&t.rotation) <= theta + 1e-12);
        prop_assert!(t.translation.amax() <= 1.0);
    }

    #[test]
    fn crop_keeps_rounded_count(s in any::<u64>(), n in 10usize..200, keep in 0.2..1.0f64) {
        let x = cloud(s, n);
        let crop = crop_partial(&x, keep, &mut seed::rng(s)).unwrap();
        prop_assert_eq!(crop.cloud.len(), (keep * n as f64).round() as usize);
    }

    #[test]
    fn chamfer_is_symmetric(s in any::<u64>()) {
        let x = cloud(s, 25);
        let y = cloud(s.wrapping_add(1), 40);
        prop_assert_eq!(chamfer_distance(&x, &y), chamfer_distance(&y, &x));
    }

    // correspondence

    #[test]
    fn returned_matrices_are_column_stochastic(s in any::<u64>(), nx in 2usize..20, ny in 2usize..20) {
        let mut rng = seed::rng(s);
        let fx = FeatureMatrix::new(random_matrix(&mut rng, 5, nx, 3.0)).unwrap();
        let fy = FeatureMatrix::new(random_matrix(&mut rng, 5, ny, 3.0)).unwrap();
        let soft = soft_correspondence(&fx, &fy).unwrap();
        prop_assert!(column_sums_are_one(&soft));
        let f_o = outlier_embedding(&fy, DEFAULT_OUTLIER_B).unwrap().vector;
        prop_assert!(column_sums_are_one(&soft_correspondence_outlier(&fx, &fy, &f_o).unwrap()));
        prop_assert!(column_sums_are_one(&sinkhorn_refine(&soft, DEFAULT_SINKHORN_ITERS, DEFAULT_SINKHORN_EPS).unwrap()));

        let x = cloud(s, nx.max(8));
        let y = cloud(s ^ 7, ny.max(8));
        prop_assert!(column_sums_are_one(&ground_truth_correspondence(&x, &y).unwrap()));
        prop_assert!(column_sums_are_one(&ground_truth_correspondence_outlier(&x, &y, 0.2).unwrap()));
    }

    #[test]
    fn softmax_is_shift_invariant(s in any::<u64>(), k in -50.0..50.0f64, col in 0usize..6) {
        let mut rng = seed::rng(s);
        let logits = random_matrix(&mut rng, 7, 6, 5.0);
        let mut shifted = logits.clone();
        shifted.column_mut(col).add_scalar_mut(k);
        let a = column_softmax(&logits);
        let b = column_softmax(&shifted);
        prop_assert!((a - b).amax() <= 1e-12);
    }

    #[test]
    fn self_correspondence_is_identity(s in any::<u64>(), n in 8usize..60) {
        let x = cloud(s, n);
        let c = ground_truth_correspondence(&x, &x).unwrap();
        prop_assert_eq!(c.entries(), &DMatrix::<f64>::identity(n, n));
    }

    #[test]
    fn outlier_embedding_is_stationary(s in any::<u64>(), ne in 2usize..12, ny in 2usize..40, b in -3.0..3.0f64) {
        let mut rng = seed::rng(s);
        let fy = FeatureMatrix::new(random_matrix(&mut rng, ne, ny, 1.0)).unwrap();
        let f = outlier_embedding(&fy, b).unwrap().vector;
        prop_assert!(outlier_embedding_stationarity(&fy, &f, b) <= 1e-8);
    }

    #[test]
    fn infinite_threshold_drops_outlier_row(s in any::<u64>()) {
        let x = cloud(s, 30);
        let y = cloud(s ^ 3, 20);
        let plain = ground_truth_correspondence(&x, &y).unwrap();
        let aug = ground_truth_correspondence_outlier(&x, &y, f64::INFINITY).unwrap();
        prop_assert_eq!(&aug.entries().rows(0, 20).into_owned(), plain.entries());
        prop_assert_eq!(aug.outlier_row().unwrap().sum(), 0.0);
    }

    // alignment

    #[test]
    fn horn_is_equivariant(s in any::<u64>()) {
        let mut rng = seed::rng(s);
        let x = cloud(s, 40);
        let noise: Vec<Vector3<f64>> = x.iter().map(|p| p + 0.05 * Vector3::from_fn(|_, _| rng.random::<f64>() - 0.5)).collect();
        let y = PointCloud::new(noise).unwrap().transformed(&sample_misalignment(&mut rng, PI, 1.0));
        let q = sample_misalignment(&mut rng, PI, 1.0);
        let r0 = horn_align(&x, &y).unwrap().transform.rotation;
        let r1 = horn_align(&x, &y.transformed(&q)).unwrap().transform.rotation;
        prop_assert!((r1 - q.rotation * r0).amax() < 1e-9);
    }

    #[test]
    fn returned_rotations_are_proper(s in any::<u64>()) {
        let mut rng = seed::rng(s);
        let x = cloud(s, 20);
        // A mirrored target makes the unconstrained solution a reflection.
        let mirror: Vec<Vector3<f64>> = x.iter().map(|p| Vector3::new(-p.x, p.y, p.z)).collect();
        let random: Vec<Vector3<f64>> = (0..20).map(|_| Vector3::from_fn(|_, _| rng.random::<f64>())).collect();
        for y in [mirror, random] {
            let r = align_pairs(x.points(), &y).unwrap().transform.rotation;
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
            prop_assert!(check_rotation(&r).is_ok());
        }
    }

    #[test]
    fn icp_residual_never_increases(s in any::<u64>()) {
        let mut rng = seed::rng(s);
        let x = cloud(s, 60);
        let y = x.transformed(&sample_misalignment(&mut rng, PI / 3.0, 0.3));
        let out = icp(&x, &y, &RigidTransform::identity(), IcpOptions::default()).unwrap();
        for w in out.trace.windows(2) {
            prop_assert!(w[1].residual <= w[0].residual + 1e-12, "{:?}", out.trace);
        }
    }

    #[test]
    fn permutation_matrix_equals_permuted_horn(s in any::<u64>()) {
        let mut rng = seed::rng(s);
        let x = cloud(s, 25);
        let y = cloud(s ^ 5, 25);
        let mut perm: Vec<usize> = (0..25).collect();
        perm.shuffle(&mut rng);
        let c = CorrespondenceMatrix::from_indices(&perm, 25).unwrap();
        let a = weighted_align(&x, &y, &c).unwrap();
        let b = horn_align(&x, &y.select(&perm).unwrap()).unwrap();
        prop_assert_eq!(a.transform, b.transform);
    }

    // learning

    #[test]
    fn cross_entropy_basics(s in any::<u64>(), nx in 1usize..10, ny in 2usize..10) {
        let mut rng = seed::rng(s);
        let logits = random_matrix(&mut rng, ny, nx, 4.0);
        let idx: Vec<usize> = (0..nx).map(|_| rng.random_range(0..ny)).collect();
        let c = CorrespondenceMatrix::from_indices(&idx, ny).unwrap();
        let loss = cross_entropy_loss(&logits, &c).unwrap();
        prop_assert!(loss.total >= 0.0);
        let uniform = cross_entropy_loss(&DMatrix::from_element(ny, nx, 0.3), &c).unwrap();
        prop_assert!((uniform.total - nx as f64 * (ny as f64).ln()).abs() < 1e-12);

        let g = cross_entropy_grad(&logits, &c).unwrap();
        for col in g.column_iter() {
            prop_assert!(col.sum().abs() <= 1e-12);
        }
        let stepped = cross_entropy_loss(&(&logits - 1e-4 * &g), &c).unwrap();
        prop_assert!(stepped.total < loss.total);
    }

    #[test]
    fn descriptors_are_rigid_invariant(s in any::<u64>()) {
        let x = cloud(s, 40);
        let t = sample_misalignment(&mut seed::rng(s ^ 9), PI, 3.0);
        let a = point_descriptors(&x, 8).unwrap();
        let b = point_descriptors(&x.transformed(&t), 8).unwrap();
        prop_assert!((a - b).amax() < 1e-9);
    }

    #[test]
    fn featurize_is_permutation_equivariant(s in any::<u64>()) {
        let net = small_net(s, 5);
        let x = cloud(s, 24);
        let mut perm: Vec<usize> = (0..24).collect();
        perm.shuffle(&mut seed::rng(s ^ 2));
        let f = featurize(&net, &x).unwrap();
        let fp = featurize(&net, &x.select(&perm).unwrap()).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            prop_assert!((fp.data().column(i) - f.data().column(p)).amax() < 1e-12);
        }
    }

    #[test]
    fn training_loss_is_rigid_invariant(s in any::<u64>()) {
        let net = small_net(s, 6);
        let mut rng = seed::rng(s ^ 4);
        let x = cloud(s, 30);
        let t = sample_misalignment(&mut rng, PI, 1.0);
        let q = sample_misalignment(&mut rng, PI, 5.0);
        let a = Sample::new(x.clone(), x.transformed(&t), t, 6).unwrap();
        let qt = q.compose(&t);
        let b = Sample::with_target(x.transformed(&q), x.transformed(&qt), t, a.c_star.clone(), 6).unwrap();
        let la = sample_gradient(&net, &a).unwrap().loss.total;
        let lb = sample_gradient(&net, &b).unwrap().loss.total;
        prop_assert!((la - lb).abs() < 1e-6);
    }

    #[test]
    fn oracle_features_recover_pose(s in any::<u64>(), n in 8usize..40) {
        let mut rng = seed::rng(s);
        let x = cloud(s, n);
        let t = sample_misalignment(&mut rng, PI, 1.0);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let y = x.transformed(&t).select(&perm).unwrap();
        // One-hot indicator per true match: source i and its target share a basis vector.
        let mut fx = DMatrix::zeros(n, n);
        let mut fy = DMatrix::zeros(n, n);
        for (j, &i) in perm.iter().enumerate() {
            fx[(i, i)] = 50.0;
            fy[(i, j)] = 1.0;
        }
        let c = soft_correspondence(&FeatureMatrix::new(fx).unwrap(), &FeatureMatrix::new(fy).unwrap()).unwrap();
        let est = weighted_align(&x, &y, &c).unwrap().transform;
        let err = rotation_error(&est.rotation, &t.rotation, RotationMetric::Geodesic).unwrap();
        prop_assert!(err < 1e-6, "{err}");
    }
}

#[test]
fn horn_beats_perturbed_candidates() {
    let mut rng = seed::rng(2024);
    for trial in 0..200 {
        let x = cloud(trial, 30);
        let noisy: Vec<Vector3<f64>> = x
            .iter()
            .map(|p| p + 0.05 * Vector3::from_fn(|_, _| rng.random::<f64>() - 0.5))
            .collect();
        let y = PointCloud::new(noisy)
            .unwrap()
            .transformed(&sample_misalignment(&mut rng, PI, 1.0));
        let best = horn_align(&x, &y).unwrap();
        let rss = |t: &RigidTransform| {
            x.iter()
                .zip(y.iter())
                .map(|(p, q)| (t.apply_point(p) - q).norm_squared())
                .sum::<f64>()
        };
        let base = rss(&best.transform);
        for _ in 0..100 {
            let d = sample_misalignment(&mut rng, 0.2, 0.1);
            let cand = d.compose(&best.transform);
            assert!(base <= rss(&cand) + 1e-12);
        }
    }
}

#[test]
fn outlier_weighted_alignment_on_clean_inliers() {
    let mut rng = seed::rng(77);
    let x = cloud(77, 50);
    let t = sample_misalignment(&mut rng, PI, 1.0);
    let y = x.transformed(&t);
    let c = ground_truth_correspondence_outlier(&x.transformed(&t), &y, 0.1).unwrap();
    let out = weighted_align_outlier(&x, &y, &c).unwrap();
    assert!(
        rotation_error(
            &out.transform.rotation,
            &t.rotation,
            RotationMetric::Geodesic
        )
        .unwrap()
            < 1e-6
    );
}
