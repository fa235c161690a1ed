//! Alignment error under corrupted correspondences versus a corrupted
//! rotation vector of the same percentage.

use corrmatch_core::align::horn_align;
use corrmatch_core::correspondence::{hard_assign, CorrespondenceMatrix};
use corrmatch_core::geom::{rotation_error, sample_misalignment, unit_cube_cloud, RotationMetric};
use corrmatch_core::seed;

use super::par_rows;
use crate::config::ExperimentConfig;
use crate::corrupt::{corrupt_correspondence, corrupt_rotation};
use crate::report::{trial_rows, StudyOutput, TrialResult};
use crate::Result;

pub const STUDY: &str = "perturb";

pub fn param(p: f64, mode: &str) -> String {
    format!("p={p};mode={mode}")
}

fn errors(r_pred: &nalgebra::Matrix3<f64>, r_true: &nalgebra::Matrix3<f64>) -> TrialResult {
    Ok(vec![
        (
            "geodesic_deg",
            rotation_error(r_pred, r_true, RotationMetric::Geodesic)?,
        ),
        (
            "euler_mae_deg",
            rotation_error(r_pred, r_true, RotationMetric::EulerMae)?,
        ),
    ])
}

/// Each trial draws a unit-cube cloud and a misalignment once; every grid
/// level corrupts that same pair with its own stream.
pub fn run_perturbation_study(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    cfg.validate()?;
    let root = seed::derive(cfg.seed, STUDY);
    let jobs: Vec<(f64, usize)> = cfg
        .corruption_grid
        .iter()
        .flat_map(|&p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();

    let rows = par_rows(&jobs, |&(p, trial)| {
        let s = seed::derive_indexed(root, "trial", trial as u64);
        let x = unit_cube_cloud(cfg.cube_points, &mut seed::child_rng(s, "cloud"));
        let truth = sample_misalignment(
            &mut seed::child_rng(s, "misalignment"),
            cfg.theta0(),
            cfg.t_bound,
        );
        let y = x.transformed(&truth);

        let correspondence = (|| -> TrialResult {
            let c_star =
                CorrespondenceMatrix::from_indices(&(0..x.len()).collect::<Vec<_>>(), y.len())?;
            let mut rng = seed::rng(seed::derive_indexed(
                s,
                "corrupt-correspondence",
                p.to_bits(),
            ));
            let c = corrupt_correspondence(&c_star, p, &mut rng)?;
            let idx: Vec<usize> = hard_assign(&c).iter().filter_map(|m| m.target()).collect();
            let est = horn_align(&x, &y.select(&idx)?)?;
            errors(&est.transform.rotation, &truth.rotation)
        })();
        let rotation = (|| -> TrialResult {
            let mut rng = seed::rng(seed::derive_indexed(s, "corrupt-rotation", p.to_bits()));
            let v = corrupt_rotation(&truth.rotvec()?, p, &mut rng)?;
            errors(&v.to_matrix(), &truth.rotation)
        })();

        let mut out = trial_rows(STUDY, trial, s, &param(p, "correspondence"), correspondence);
        out.extend(trial_rows(STUDY, trial, s, &param(p, "rotation"), rotation));
        out
    });

    Ok(StudyOutput::new(STUDY, rows)
        .with_note("cloud", "uniform in the cube [-0.5, 0.5]^3")
        .with_note(
            "correspondence_mode",
            "floor(p*N/100) matches moved to other targets; horn_align on decoded pairs",
        )
        .with_note(
            "rotation_mode",
            "v_pert = v* + (p/100)*|v*|*u, u uniform on the unit sphere",
        ))
}
