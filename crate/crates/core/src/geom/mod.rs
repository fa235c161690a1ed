//! Point-cloud and rigid-transform algebra, synthetic data and metrics.

mod cloud;
mod metrics;
mod rotation;
mod shapes;

pub use cloud::{crop_partial, load_xyz, save_xyz, PartialCrop, PointCloud};
pub use metrics::{
    chamfer_distance, rotation_error, translation_error, translation_rmse, RotationMetric,
};
pub use rotation::{
    check_rotation, euler_zyx, geodesic_angle, matrix_to_rotvec, random_unit_vector,
    rotvec_to_matrix, sample_misalignment, RigidTransform, RotationVector, ROTATION_TOLERANCE,
};
pub use shapes::{generate_shape, unit_cube_cloud, ShapeKind};
