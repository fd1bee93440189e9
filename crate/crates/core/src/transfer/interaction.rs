use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::models::CategoryModels;
use super::object::Demonstration;
use crate::error::{Error, Result};
use crate::geom::{NeighborIndex, Point3, RigidTransform, Vec3};
use crate::registration::kabsch;
use crate::shapemodel::{warp_point_indices, CanonicalPartModel, InferenceResult};

/// Fewest close pairs that make a part pair count as interacting.
pub const MIN_PAIRS: usize = 3;

/// Index-grounded point pairs between part `m` of object A and part `n` of object B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionPointSet {
    pub part_m: String,
    pub part_n: String,
    /// `(canonical index in m's model, canonical index in n's model)`.
    pub pairs: Vec<(usize, usize)>,
    /// Goal offset from the n point to the m point, in the frame of n's fit.
    pub demo_displacements: Vec<Vec3>,
}

impl InteractionPointSet {
    pub fn relation(&self) -> (String, String) {
        (self.part_m.clone(), self.part_n.clone())
    }

    /// The same set seen from part `n`.
    pub fn reversed(&self) -> InteractionPointSet {
        InteractionPointSet {
            part_m: self.part_n.clone(),
            part_n: self.part_m.clone(),
            pairs: self.pairs.iter().map(|&(i, j)| (j, i)).collect(),
            demo_displacements: self.demo_displacements.iter().map(|d| -d).collect(),
        }
    }
}

/// Cross pairs `(i, j, d²)` with `‖x_i − y_j‖ ≤ delta`, the `k_max` closest,
/// ordered by distance then indices.
pub fn close_pairs(x: &[Point3], y: &[Point3], delta: f64, k_max: usize) -> Vec<(usize, usize, f64)> {
    if x.is_empty() || y.is_empty() || k_max == 0 {
        return Vec::new();
    }
    let index = NeighborIndex::new(y);
    let mut pairs: Vec<(usize, usize, f64)> = x
        .iter()
        .enumerate()
        .flat_map(|(i, p)| index.within(p, delta).into_iter().map(move |(j, d2)| (i, j, d2)))
        .collect();
    pairs.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    pairs.truncate(k_max);
    pairs
}

/// Fits of both demonstration objects, keyed by part.
pub type FitSet = BTreeMap<String, InferenceResult>;

/// `fit` with its pose moved by `t`.
pub fn moved_fit(fit: &InferenceResult, t: &RigidTransform) -> InferenceResult {
    InferenceResult {
        pose: t.compose(&fit.pose),
        ..fit.clone()
    }
}

/// Interaction points between every part pair of the demonstration.
///
/// `fits_a` are fits of object A in its initial pose; they are moved to the
/// goal by `t_ab` before the endpoints are grounded.
pub fn extract_interaction_points(
    demo: &Demonstration,
    models_a: &CategoryModels,
    models_b: &CategoryModels,
    fits_a: &FitSet,
    fits_b: &FitSet,
    delta: f64,
    k_max: usize,
) -> Result<Vec<InteractionPointSet>> {
    let goal = demo.goal_a();
    let mut out = Vec::new();
    for (m, cloud_m) in &goal.parts {
        let model_m = models_a.model(m)?;
        let fit_m = moved_fit(fits_a.get(m).ok_or_else(|| Error::MissingFit(m.clone()))?, &demo.t_ab);
        for (n, cloud_n) in &demo.object_b.parts {
            let pairs = close_pairs(&cloud_m.points, &cloud_n.points, delta, k_max);
            if pairs.len() < MIN_PAIRS {
                continue;
            }
            let model_n = models_b.model(n)?;
            let fit_n = fits_b.get(n).ok_or_else(|| Error::MissingFit(n.clone()))?;
            let pm: Vec<Point3> = pairs.iter().map(|p| cloud_m.points[p.0]).collect();
            let pn: Vec<Point3> = pairs.iter().map(|p| cloud_n.points[p.1]).collect();
            let cm = warp_point_indices(model_m, &fit_m, &pm)?;
            let cn = warp_point_indices(model_n, fit_n, &pn)?;
            let recon_m = fit_m.posed_reconstruction(model_m)?;
            let recon_n = fit_n.posed_reconstruction(model_n)?;
            let to_n = fit_n.pose.inverse();
            let demo_displacements = cm
                .iter()
                .zip(&cn)
                .map(|(&i, &j)| to_n.apply_vector(&(recon_m.points[i] - recon_n.points[j])))
                .collect();
            out.push(InteractionPointSet {
                part_m: m.clone(),
                part_n: n.clone(),
                pairs: cm.into_iter().zip(cn).collect(),
                demo_displacements,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::NoInteraction);
    }
    Ok(out)
}

/// World-frame positions of the interaction points on the fitted parts `m'` and `n'`.
pub fn transfer_points(
    ips: &InteractionPointSet,
    fit_m: &InferenceResult,
    fit_n: &InferenceResult,
    model_m: &CanonicalPartModel,
    model_n: &CanonicalPartModel,
) -> Result<Vec<(Point3, Point3)>> {
    let rm = fit_m.posed_reconstruction(model_m)?;
    let rn = fit_n.posed_reconstruction(model_n)?;
    ips.pairs
        .iter()
        .map(|&(i, j)| {
            let a = rm.points.get(i).ok_or_else(|| Error::Invalid(format!("index {i} outside model `{}`", ips.part_m)))?;
            let b = rn.points.get(j).ok_or_else(|| Error::Invalid(format!("index {j} outside model `{}`", ips.part_n)))?;
            Ok((*a, *b))
        })
        .collect()
}

/// Demonstrated displacements expressed in the world frame of the fit of `n'`.
pub fn world_displacements(ips: &InteractionPointSet, fit_n: &InferenceResult) -> Vec<Vec3> {
    ips.demo_displacements.iter().map(|d| fit_n.pose.apply_vector(d)).collect()
}

/// Rigid motion of `m'` that best restores the demonstrated offsets.
pub fn align_pair(transferred: &[(Point3, Point3)], displacements: &[Vec3]) -> Result<RigidTransform> {
    if transferred.len() != displacements.len() {
        return Err(Error::DimensionMismatch {
            expected: transferred.len(),
            got: displacements.len(),
        });
    }
    let pairs: Vec<(Point3, Point3)> = transferred
        .iter()
        .zip(displacements)
        .map(|(&(pm, pn), d)| (pm, pn + d))
        .collect();
    kabsch(&pairs, None)
}
