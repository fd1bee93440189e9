use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geom::{Point3, RigidTransform, Vec3};

/// Relative spread below which a point set is treated as collinear.
const COLLINEAR_TOL: f64 = 1e-12;

/// Weighted least-squares rigid transform mapping each `a` onto its `b`.
///
/// Minimizes `Σ wᵢ‖T·aᵢ − bᵢ‖²`. The rotation is always proper (det = +1).
pub fn kabsch(pairs: &[(Point3, Point3)], weights: Option<&[f64]>) -> Result<RigidTransform> {
    if pairs.len() < 3 {
        return Err(Error::RankDeficient);
    }
    if let Some(w) = weights {
        if w.len() != pairs.len() {
            return Err(Error::DimensionMismatch {
                expected: pairs.len(),
                got: w.len(),
            });
        }
        if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::Invalid("kabsch weights must be finite and non-negative".into()));
        }
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..pairs.len()).map(weight).sum();
    if total <= 0.0 {
        return Err(Error::RankDeficient);
    }

    let mut ca = Vec3::zeros();
    let mut cb = Vec3::zeros();
    for (i, (a, b)) in pairs.iter().enumerate() {
        ca += weight(i) * a.coords;
        cb += weight(i) * b.coords;
    }
    ca /= total;
    cb /= total;

    let mut h = Matrix3::zeros();
    let mut spread_a = Matrix3::zeros();
    let mut spread_b = Matrix3::zeros();
    for (i, (a, b)) in pairs.iter().enumerate() {
        let da = a.coords - ca;
        let db = b.coords - cb;
        let w = weight(i);
        h += w * da * db.transpose();
        spread_a += w * da * da.transpose();
        spread_b += w * db * db.transpose();
    }
    if is_collinear(&spread_a) || is_collinear(&spread_b) {
        return Err(Error::RankDeficient);
    }

    let svd = h.svd(true, true);
    let u = svd.u.ok_or(Error::RankDeficient)?;
    let v_t = svd.v_t.ok_or(Error::RankDeficient)?;
    let v = v_t.transpose();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = v * d * u.transpose();
    let t = cb - r * ca;
    Ok(RigidTransform::from_nearest_rotation(&r, t))
}

fn is_collinear(spread: &Matrix3<f64>) -> bool {
    let mut ev: Vec<f64> = spread.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev[0] <= 0.0 || ev[1] <= COLLINEAR_TOL * ev[0]
}
