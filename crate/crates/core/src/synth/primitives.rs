//! Analytic primitives with exact signed distance and a surface parametrization.
//!
//! A [`SurfaceCoord`] names a point on a primitive's surface independently of
//! its dimensions, so evaluating the same coordinate on two members of a
//! family yields ground-truth correspondences.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{Point3, RigidTransform, Vec3};

/// Intrinsic surface coordinate: face index plus two unit-interval parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCoord {
    pub face: u16,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    /// Closed `(r, z)` polygon revolved about the local z-axis.
    Revolved { profile: Vec<[f64; 2]> },
    /// Tube of radius `minor` around an arc of radius `major` in the local
    /// xz-plane, spanning `±half_angle` from +x toward +z, with spherical caps.
    TorusArc {
        major: f64,
        minor: f64,
        half_angle: f64,
    },
    /// Axis-aligned box centered at the local origin.
    Cuboid { half: [f64; 3] },
}

/// A shape placed in its object's frame by `frame` (local → object).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub shape: Shape,
    pub frame: RigidTransform,
}

impl Primitive {
    pub fn new(shape: Shape, frame: RigidTransform) -> Self {
        Primitive { shape, frame }
    }

    /// Signed distance from `p` (object frame); negative inside.
    pub fn sdf(&self, p: &Point3) -> f64 {
        let q = self.frame.inverse().apply(p);
        match &self.shape {
            Shape::Revolved { profile } => {
                let r = (q.x * q.x + q.y * q.y).sqrt();
                polygon_sdf(profile, [r, q.z])
            }
            Shape::TorusArc {
                major,
                minor,
                half_angle,
            } => {
                let phi = q.z.atan2(q.x);
                if phi.abs() <= *half_angle {
                    let rho = (q.x * q.x + q.z * q.z).sqrt();
                    ((rho - major).powi(2) + q.y * q.y).sqrt() - minor
                } else {
                    let end = |a: f64| Point3::new(major * a.cos(), 0.0, major * a.sin());
                    let d = (q - end(*half_angle)).norm().min((q - end(-half_angle)).norm());
                    d - minor
                }
            }
            Shape::Cuboid { half } => {
                let d = Vec3::new(q.x.abs() - half[0], q.y.abs() - half[1], q.z.abs() - half[2]);
                let outside = Vec3::new(d.x.max(0.0), d.y.max(0.0), d.z.max(0.0)).norm();
                outside + d.x.max(d.y).max(d.z).min(0.0)
            }
        }
    }

    /// Surface area of each face, in face order.
    pub fn face_areas(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Revolved { profile } => (0..profile.len())
                .map(|i| {
                    let a = profile[i];
                    let b = profile[(i + 1) % profile.len()];
                    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                    PI * (a[0] + b[0]) * len
                })
                .collect(),
            Shape::TorusArc {
                major,
                minor,
                half_angle,
            } => vec![2.0 * half_angle * major * 2.0 * PI * minor],
            Shape::Cuboid { half } => {
                let [x, y, z] = *half;
                vec![4.0 * y * z, 4.0 * y * z, 4.0 * x * z, 4.0 * x * z, 4.0 * x * y, 4.0 * x * y]
            }
        }
    }

    /// Point at `coord`, in the object frame.
    pub fn surface_point(&self, c: &SurfaceCoord) -> Point3 {
        let local = match &self.shape {
            Shape::Revolved { profile } => {
                let i = c.face as usize % profile.len();
                let a = profile[i];
                let b = profile[(i + 1) % profile.len()];
                let r = a[0] + (b[0] - a[0]) * c.u;
                let z = a[1] + (b[1] - a[1]) * c.u;
                let theta = 2.0 * PI * c.v;
                Point3::new(r * theta.cos(), r * theta.sin(), z)
            }
            Shape::TorusArc {
                major,
                minor,
                half_angle,
            } => {
                let phi = -half_angle + 2.0 * half_angle * c.u;
                let psi = 2.0 * PI * c.v;
                let rho = major + minor * psi.cos();
                Point3::new(rho * phi.cos(), minor * psi.sin(), rho * phi.sin())
            }
            Shape::Cuboid { half } => {
                let axis = (c.face / 2) as usize;
                let sign = if c.face % 2 == 0 { 1.0 } else { -1.0 };
                let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
                let mut p = [0.0; 3];
                p[axis] = sign * half[axis];
                p[a1] = (2.0 * c.u - 1.0) * half[a1];
                p[a2] = (2.0 * c.v - 1.0) * half[a2];
                Point3::new(p[0], p[1], p[2])
            }
        };
        self.frame.apply(&local)
    }

    /// Area-uniform random coordinate on `face`.
    pub fn sample_on_face<R: Rng>(&self, face: u16, rng: &mut R) -> SurfaceCoord {
        match &self.shape {
            Shape::Revolved { profile } => {
                let i = face as usize % profile.len();
                let r0 = profile[i][0];
                let r1 = profile[(i + 1) % profile.len()][0];
                let f: f64 = rng.random();
                // invert the CDF of a density proportional to r(u)
                let u = if (r1 - r0).abs() < 1e-12 {
                    f
                } else {
                    ((r0 * r0 + (r1 * r1 - r0 * r0) * f).max(0.0).sqrt() - r0) / (r1 - r0)
                };
                SurfaceCoord {
                    face,
                    u: u.clamp(0.0, 1.0),
                    v: rng.random(),
                }
            }
            Shape::TorusArc { major, minor, .. } => loop {
                let u: f64 = rng.random();
                let v: f64 = rng.random();
                let accept = (major + minor * (2.0 * PI * v).cos()) / (major + minor);
                if rng.random::<f64>() <= accept {
                    break SurfaceCoord { face, u, v };
                }
            },
            Shape::Cuboid { .. } => SurfaceCoord {
                face,
                u: rng.random(),
                v: rng.random(),
            },
        }
    }
}

/// Exact signed distance to a simple closed polygon (negative inside).
pub fn polygon_sdf(poly: &[[f64; 2]], p: [f64; 2]) -> f64 {
    let n = poly.len();
    let sub = |a: [f64; 2], b: [f64; 2]| [a[0] - b[0], a[1] - b[1]];
    let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
    let mut d = dot(sub(p, poly[0]), sub(p, poly[0]));
    let mut s = 1.0;
    let mut j = n - 1;
    for i in 0..n {
        let e = sub(poly[j], poly[i]);
        let w = sub(p, poly[i]);
        let ee = dot(e, e);
        let t = if ee > 0.0 { (dot(w, e) / ee).clamp(0.0, 1.0) } else { 0.0 };
        let b = [w[0] - e[0] * t, w[1] - e[1] * t];
        d = d.min(dot(b, b));
        let c1 = p[1] >= poly[i][1];
        let c2 = p[1] < poly[j][1];
        let c3 = e[0] * w[1] > e[1] * w[0];
        if (c1 && c2 && c3) || (!c1 && !c2 && !c3) {
            s = -s;
        }
        j = i;
    }
    s * d.sqrt()
}
