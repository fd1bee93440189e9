//! Relational descriptors: binary per-point labels that tie a part to its
//! neighbors on the same object, plus a world-height label.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::geom::{adjacency_key, NeighborIndex, PointCloud, Z_KEY};

/// Fraction of the median cross-part distance below which a point is labeled adjacent.
pub const RELATION_RATIO: f64 = 0.4;

/// Parts closer than this fraction of the object extent are adjacent.
pub const ADJACENCY_FRACTION: f64 = 0.05;

/// `1(dist(x, other) < median(dist) · ratio)` for every point `x` of `part`.
pub fn relational_labels(part: &PointCloud, other: &PointCloud, ratio: f64) -> Result<Vec<bool>> {
    part.ensure_non_empty()?;
    other.ensure_non_empty()?;
    let index = NeighborIndex::new(&other.points);
    let dist: Vec<f64> = part
        .points
        .iter()
        .map(|p| index.nearest(p).unwrap().1.sqrt())
        .collect();
    let threshold = median(&dist) * ratio;
    Ok(dist.iter().map(|&d| d < threshold).collect())
}

/// `1(z < mean z)` over the part's own points.
pub fn z_labels(part: &PointCloud) -> Vec<bool> {
    let mean = part.points.iter().map(|p| p.z).sum::<f64>() / part.len().max(1) as f64;
    part.points.iter().map(|p| p.z < mean).collect()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Closest-point distance between two clouds.
pub fn min_distance(a: &PointCloud, b: &PointCloud) -> f64 {
    let index = NeighborIndex::new(&b.points);
    a.points
        .iter()
        .map(|p| index.nearest(p).map_or(f64::INFINITY, |(_, d2)| d2.sqrt()))
        .fold(f64::INFINITY, f64::min)
}

/// Adjacent part names for every part, by closest-point distance below `threshold`.
pub fn part_adjacency(parts: &BTreeMap<String, PointCloud>, threshold: f64) -> BTreeMap<String, Vec<String>> {
    let mut out: BTreeMap<String, Vec<String>> = parts.keys().map(|k| (k.clone(), Vec::new())).collect();
    let names: Vec<&String> = parts.keys().collect();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            if min_distance(&parts[*a], &parts[*b]) < threshold {
                out.get_mut(*a).unwrap().push((*b).clone());
                out.get_mut(*b).unwrap().push((*a).clone());
            }
        }
    }
    out
}

/// Copies of `parts` carrying the z label and one adjacency label per listed neighbor.
///
/// Neighbors missing from `parts` are skipped.
pub fn label_parts(
    parts: &BTreeMap<String, PointCloud>,
    adjacency: &BTreeMap<String, Vec<String>>,
) -> Result<BTreeMap<String, PointCloud>> {
    let mut out = BTreeMap::new();
    for (name, cloud) in parts {
        let mut labeled = cloud.clone();
        labeled.clear_labels();
        labeled.set_label(Z_KEY, z_labels(cloud))?;
        for other in adjacency.get(name).into_iter().flatten() {
            if let Some(other_cloud) = parts.get(other) {
                labeled.set_label(adjacency_key(other), relational_labels(cloud, other_cloud, RELATION_RATIO)?)?;
            }
        }
        out.insert(name.clone(), labeled);
    }
    Ok(out)
}
