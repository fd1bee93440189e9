use serde::{Deserialize, Serialize};

use super::kabsch;
use crate::error::{Error, Result};
use crate::geom::{NeighborIndex, Point3, PointCloud, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcpConfig {
    pub max_iterations: usize,
    /// Stop once the mean residual changes by less than this.
    pub convergence_tolerance: f64,
    #[serde(default)]
    pub max_correspondence_distance: Option<f64>,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            convergence_tolerance: 1e-14,
            max_correspondence_distance: None,
        }
    }
}

impl IcpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.convergence_tolerance > 0.0) {
            return Err(Error::Invalid("icp convergence_tolerance must be > 0".into()));
        }
        if let Some(d) = self.max_correspondence_distance {
            if !(d > 0.0) {
                return Err(Error::Invalid("icp max_correspondence_distance must be > 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IcpResult {
    /// Maps `source` onto `target`; already composed with the initial guess.
    pub transform: RigidTransform,
    /// Mean squared nearest-neighbor distance at `transform`.
    pub residual: f64,
    /// Residual before each update, ending with the final residual.
    pub history: Vec<f64>,
    pub converged: bool,
}

/// Point-to-point ICP.
pub fn icp(
    source: &PointCloud,
    target: &PointCloud,
    init: &RigidTransform,
    cfg: &IcpConfig,
) -> Result<IcpResult> {
    source.ensure_non_empty()?;
    target.ensure_non_empty()?;
    cfg.validate()?;
    let index = NeighborIndex::new(&target.points);
    let max_d2 = cfg.max_correspondence_distance.map(|d| d * d);

    let mut current = *init;
    let mut history = Vec::new();
    let mut converged = false;
    let mut pairs: Vec<(Point3, Point3)> = Vec::with_capacity(source.len());
    let mut residual = correspond(&index, &current, &source.points, max_d2, &mut pairs)?;
    history.push(residual);

    for _ in 0..cfg.max_iterations {
        let step = kabsch(&pairs, None)?;
        let candidate = step.compose(&current).renormalized();
        let mut next_pairs = Vec::with_capacity(source.len());
        let next = correspond(&index, &candidate, &source.points, max_d2, &mut next_pairs)?;
        if next > residual {
            // only possible with correspondence rejection; keep the better pose
            converged = true;
            break;
        }
        let change = residual - next;
        current = candidate;
        residual = next;
        pairs = next_pairs;
        history.push(residual);
        if change < cfg.convergence_tolerance {
            converged = true;
            break;
        }
    }

    Ok(IcpResult {
        transform: current,
        residual,
        history,
        converged,
    })
}

fn correspond(
    index: &NeighborIndex,
    pose: &RigidTransform,
    source: &[Point3],
    max_d2: Option<f64>,
    pairs: &mut Vec<(Point3, Point3)>,
) -> Result<f64> {
    pairs.clear();
    let mut sum = 0.0;
    for p in source {
        let q = pose.apply(p);
        let (j, d2) = index.nearest(&q).unwrap();
        if max_d2.is_some_and(|m| d2 > m) {
            continue;
        }
        sum += d2;
        pairs.push((q, index.points()[j]));
    }
    if pairs.is_empty() {
        return Err(Error::NoCorrespondences);
    }
    Ok(sum / pairs.len() as f64)
}
