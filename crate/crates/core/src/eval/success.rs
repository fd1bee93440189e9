use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point3, RigidTransform};
use crate::shapemodel::{warp_point_indices, CanonicalPartModel, InferenceResult};
use crate::synth::{task_predicate, AnalyticSdf, ParametricObjectSpec, Task};

/// Outcome of checking one placement against the analytic scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessCheck {
    pub success: bool,
    pub penetration_depth: f64,
    pub task_predicate: bool,
}

/// Penetration of the placed points of A into B, plus the task predicate.
///
/// `placed_a` are surface samples of object A already moved into B's frame by
/// `rel` (A's own frame → B's frame); the predicate is evaluated on `rel`.
pub fn check_success(
    task: Task,
    spec_a: &ParametricObjectSpec,
    spec_b: &ParametricObjectSpec,
    placed_a: &[Point3],
    sdf_b: &AnalyticSdf,
    rel: &RigidTransform,
    tolerance: f64,
) -> SuccessCheck {
    let penetration_depth = sdf_b.penetration(placed_a);
    let task_predicate = task_predicate(task, spec_a, spec_b, rel);
    SuccessCheck {
        success: penetration_depth <= tolerance && task_predicate,
        penetration_depth,
        task_predicate,
    }
}

/// Median distance between transferred points and their true counterparts, over `extent`.
pub fn keypoint_transfer_error(transferred: &[Point3], truth: &[Point3], extent: f64) -> Result<f64> {
    if transferred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: transferred.len(),
        });
    }
    if transferred.is_empty() {
        return Err(Error::Invalid("no keypoints to compare".into()));
    }
    if !(extent > 0.0) {
        return Err(Error::Invalid(format!("extent must be > 0, got {extent}")));
    }
    let mut d: Vec<f64> = transferred.iter().zip(truth).map(|(a, b)| (a - b).norm()).collect();
    d.sort_by(f64::total_cmp);
    let n = d.len();
    let median = if n % 2 == 1 { d[n / 2] } else { 0.5 * (d[n / 2 - 1] + d[n / 2]) };
    Ok(median / extent)
}

/// Carries points on a fitted source part to the matching places on a fitted
/// target part of the same category, through the shared canonical indices.
pub fn transfer_keypoints(
    model: &CanonicalPartModel,
    source_fit: &InferenceResult,
    target_fit: &InferenceResult,
    points: &[Point3],
) -> Result<Vec<Point3>> {
    let idx = warp_point_indices(model, source_fit, points)?;
    let target = target_fit.posed_reconstruction(model)?;
    Ok(idx.into_iter().map(|i| target.points[i]).collect())
}
