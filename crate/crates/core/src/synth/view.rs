use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{NeighborIndex, Point3, Vec3};
use crate::transfer::PartDecomposedObject;

/// Pinhole camera for z-buffer visibility culling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub eye: Point3,
    pub look_at: Point3,
    /// Grid cells per side.
    pub resolution: usize,
    /// Full field of view, radians.
    pub fov: f64,
    /// Each point covers a disk of this many mean point spacings (of its part) in the depth buffer.
    pub splat_scale: f64,
    /// Points within this depth of the nearest surface in their cell stay visible.
    pub depth_band: f64,
}

impl CameraSpec {
    pub fn new(eye: Point3, look_at: Point3) -> Self {
        CameraSpec {
            eye,
            look_at,
            resolution: 128,
            fov: 0.8,
            splat_scale: 1.0,
            depth_band: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if (self.eye - self.look_at).norm() == 0.0 {
            return Err(Error::Invalid("camera eye equals look_at".into()));
        }
        if self.resolution == 0 || !(self.fov > 0.0 && self.fov < std::f64::consts::PI) {
            return Err(Error::Invalid("camera resolution must be ≥ 1 and fov in (0, π)".into()));
        }
        if !(self.splat_scale >= 0.0) || !(self.depth_band >= 0.0) {
            return Err(Error::Invalid("camera splat_scale and depth_band must be ≥ 0".into()));
        }
        Ok(())
    }

    /// Orthonormal (right, up, forward) camera axes.
    fn axes(&self) -> (Vec3, Vec3, Vec3) {
        let f = (self.look_at - self.eye).normalize();
        let hint = if f.cross(&Vec3::z()).norm() < 1e-6 { Vec3::y() } else { Vec3::z() };
        let r = f.cross(&hint).normalize();
        let u = r.cross(&f);
        (r, u, f)
    }
}

/// Result of a partial view: the visible object plus the parts that vanished.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialView {
    pub object: PartDecomposedObject,
    /// Parts left with fewer than 3 visible points.
    pub dropped: Vec<String>,
    /// Visible point indices into each surviving part of the input.
    pub kept: BTreeMap<String, Vec<usize>>,
}

/// Keeps the points visible from `cam`, preserving part assignment and labels.
pub fn partial_view(obj: &PartDecomposedObject, cam: &CameraSpec) -> Result<PartialView> {
    cam.validate()?;
    obj.validate()?;
    let (r, u, f) = cam.axes();
    let res = cam.resolution as isize;
    let half = (cam.fov / 2.0).tan();

    let project = |p: &Point3| -> Option<(isize, isize, f64)> {
        let q = p - cam.eye;
        let depth = q.dot(&f);
        if depth <= 0.0 {
            return None;
        }
        let x = q.dot(&r) / (depth * half);
        let y = q.dot(&u) / (depth * half);
        let cx = ((x + 1.0) * 0.5 * res as f64).floor() as isize;
        let cy = ((y + 1.0) * 0.5 * res as f64).floor() as isize;
        (0..res).contains(&cx).then_some(())?;
        (0..res).contains(&cy).then_some(())?;
        Some((cx, cy, depth))
    };

    let mut zbuf = vec![f64::INFINITY; (res * res) as usize];
    // world size of one cell at unit depth
    let cell = 2.0 * half / res as f64;
    let mut projected: BTreeMap<&str, Vec<Option<(isize, isize, f64)>>> = BTreeMap::new();
    for (name, cloud) in &obj.parts {
        let radius = cam.splat_scale * mean_spacing(&cloud.points);
        let proj: Vec<_> = cloud.points.iter().map(project).collect();
        for &(cx, cy, depth) in proj.iter().flatten() {
            let s = (radius / (depth * cell)).round() as isize;
            for dy in -s..=s {
                for dx in -s..=s {
                    if dx * dx + dy * dy > s * s {
                        continue;
                    }
                    let (x, y) = (cx + dx, cy + dy);
                    if (0..res).contains(&x) && (0..res).contains(&y) {
                        let cell = &mut zbuf[(y * res + x) as usize];
                        *cell = cell.min(depth);
                    }
                }
            }
        }
        projected.insert(name, proj);
    }

    let mut parts = BTreeMap::new();
    let mut kept = BTreeMap::new();
    let mut dropped = Vec::new();
    for (name, cloud) in &obj.parts {
        let idx: Vec<usize> = projected[name.as_str()]
            .iter()
            .enumerate()
            .filter_map(|(i, pr)| {
                let (cx, cy, depth) = (*pr)?;
                (depth <= zbuf[(cy * res + cx) as usize] + cam.depth_band).then_some(i)
            })
            .collect();
        if idx.len() < 3 {
            warn!("part `{name}` has {} visible points and was dropped", idx.len());
            dropped.push(name.clone());
            continue;
        }
        parts.insert(name.clone(), cloud.select(&idx));
        kept.insert(name.clone(), idx);
    }
    if parts.is_empty() {
        return Err(Error::EmptyView);
    }
    Ok(PartialView {
        object: PartDecomposedObject {
            category: obj.category.clone(),
            parts,
        },
        dropped,
        kept,
    })
}

fn mean_spacing(points: &[Point3]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let index = NeighborIndex::new(points);
    points.iter().map(|p| index.knn(p, 2)[1].1).sum::<f64>() / points.len() as f64
}

/// Convenience wrapper returning only the visible object.
pub fn visible(obj: &PartDecomposedObject, cam: &CameraSpec) -> Result<PartDecomposedObject> {
    Ok(partial_view(obj, cam)?.object)
}
