use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::{Point3, PointCloud, Vec3};
use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Element of SE(3): `p ↦ rotation·p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformWire", into = "TransformWire")]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
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
            translation: Vec3::zeros(),
        }
    }

    /// Checked constructor: `rotation` must be orthonormal with determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidRotation("non-finite entry".into()));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if ortho > ORTHONORMAL_TOL {
            return Err(Error::InvalidRotation(format!(
                "RᵀR deviates from identity by {ortho:e}"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidRotation(format!("determinant {det}")));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    pub fn from_rotation(r: Rotation3<f64>) -> Self {
        Self {
            rotation: *r.matrix(),
            translation: Vec3::zeros(),
        }
    }

    /// Rotation about `axis` by `angle` radians, followed by `t`.
    pub fn from_axis_angle(axis: Vec3, angle: f64, t: Vec3) -> Self {
        let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        Self {
            rotation: *r.matrix(),
            translation: t,
        }
    }

    /// `Rz(yaw)·Ry(pitch)·Rx(roll)` followed by `t`.
    pub fn from_euler(yaw: f64, pitch: f64, roll: f64, t: Vec3) -> Self {
        let r = Rotation3::from_euler_angles(roll, pitch, yaw);
        Self {
            rotation: *r.matrix(),
            translation: t,
        }
    }

    /// Projects an arbitrary 3×3 matrix to the nearest rotation (SVD, det fixed to +1).
    pub fn from_nearest_rotation(m: &Matrix3<f64>, t: Vec3) -> Self {
        Self {
            rotation: project_to_so3(m),
            translation: t,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn apply_points(&self, points: &[Point3]) -> Vec<Point3> {
        points.iter().map(|p| self.apply(p)).collect()
    }

    /// Transformed copy; labels carried over unchanged.
    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        let mut out = cloud.clone();
        for p in &mut out.points {
            *p = self.apply(p);
        }
        out
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Geodesic angle (radians) between the two rotations.
    pub fn rotation_distance(&self, other: &RigidTransform) -> f64 {
        rotation_angle(&(self.rotation.transpose() * other.rotation))
    }

    pub fn translation_distance(&self, other: &RigidTransform) -> f64 {
        (self.translation - other.translation).norm()
    }

    /// Yaw of the rotated x-axis projected onto the xy-plane.
    pub fn heading(&self) -> f64 {
        let x = self.rotation.column(0);
        x[1].atan2(x[0])
    }

    pub fn is_finite(&self) -> bool {
        self.rotation
            .iter()
            .chain(self.translation.iter())
            .all(|v| v.is_finite())
    }

    /// Re-orthonormalizes accumulated rounding drift.
    pub fn renormalized(&self) -> RigidTransform {
        RigidTransform {
            rotation: project_to_so3(&self.rotation),
            translation: self.translation,
        }
    }

    /// Chordal mean: arithmetic mean translation, mean rotation matrix projected to SO(3).
    pub fn chordal_mean(transforms: &[RigidTransform]) -> Option<RigidTransform> {
        if transforms.is_empty() {
            return None;
        }
        let n = transforms.len() as f64;
        let mut r = Matrix3::zeros();
        let mut t = Vec3::zeros();
        for x in transforms {
            r += x.rotation;
            t += x.translation;
        }
        Some(RigidTransform::from_nearest_rotation(&(r / n), t / n))
    }
}

/// Angle of a rotation matrix, robust near 0 and π.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let skew = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let sin = skew.norm() / 2.0;
    sin.atan2(cos)
}

pub fn project_to_so3(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * v_t
}

#[derive(Serialize, Deserialize)]
struct TransformWire {
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl From<RigidTransform> for TransformWire {
    fn from(t: RigidTransform) -> Self {
        let r = t.rotation;
        TransformWire {
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl TryFrom<TransformWire> for RigidTransform {
    type Error = Error;

    fn try_from(w: TransformWire) -> Result<Self> {
        RigidTransform::new(
            Matrix3::from_row_slice(&w.rotation),
            Vec3::from_row_slice(&w.translation),
        )
    }
}
