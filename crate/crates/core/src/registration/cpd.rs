//! Non-rigid Coherent Point Drift (Myronenko & Song).
//!
//! The source cloud supplies the Gaussian-mixture centroids, moved by a
//! displacement `G·W` with Gaussian motion-coherence kernel `G`. EM alternates
//! soft assignment of target points to centroids with a regularized linear
//! solve for `W` and a closed-form variance update.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud, Vec3};

const MIN_SIGMA2: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpdConfig {
    /// Kernel width of the smoothness prior, in unit-diagonal scale.
    pub beta: f64,
    /// Regularization weight.
    pub lambda: f64,
    pub max_iterations: usize,
    /// Relative objective change that counts as converged.
    pub tolerance: f64,
    /// Uniform outlier component weight in `[0, 1)`.
    pub outlier_weight: f64,
}

impl Default for CpdConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            lambda: 2.0,
            max_iterations: 150,
            tolerance: 1e-5,
            outlier_weight: 0.1,
        }
    }
}

impl CpdConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Invalid(format!("cpd {what}")));
        if !(self.beta > 0.0) {
            return bad("beta must be > 0");
        }
        if !(self.lambda > 0.0) {
            return bad("lambda must be > 0");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be > 0");
        }
        if !(0.0..1.0).contains(&self.outlier_weight) {
            return bad("outlier_weight must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Per-point offsets for a source cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementField {
    pub displacements: Vec<Vec3>,
}

impl DisplacementField {
    pub fn zeros(n: usize) -> Self {
        Self {
            displacements: vec![Vec3::zeros(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.displacements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.displacements.is_empty()
    }

    pub fn max_norm(&self) -> f64 {
        self.displacements.iter().map(|d| d.norm()).fold(0.0, f64::max)
    }

    /// Moves each point of `source` by its offset; labels are kept.
    pub fn apply(&self, source: &PointCloud) -> Result<PointCloud> {
        if source.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: source.len(),
            });
        }
        let mut out = source.clone();
        for (p, d) in out.points.iter_mut().zip(&self.displacements) {
            *p += d;
        }
        Ok(out)
    }

    /// Row-major `3n` vector `[dx0, dy0, dz0, dx1, ...]`.
    pub fn flatten(&self) -> Vec<f64> {
        self.displacements
            .iter()
            .flat_map(|d| [d.x, d.y, d.z])
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct CpdResult {
    pub field: DisplacementField,
    pub converged: bool,
    pub iterations: usize,
    /// Penalized negative log-likelihood at the start of each EM iteration.
    pub objective_history: Vec<f64>,
    /// Final mixture variance in original units².
    pub sigma2: f64,
}

/// Registers `source` (centroids) onto `target`; returns the displacement of each source point.
pub fn cpd_nonrigid(source: &PointCloud, target: &PointCloud, cfg: &CpdConfig) -> Result<CpdResult> {
    source.ensure_non_empty()?;
    target.ensure_non_empty()?;
    cfg.validate()?;
    let first = target.points[0];
    if target.points.iter().all(|p| *p == first) {
        return Err(Error::DegenerateTarget);
    }

    let center = target.centroid().coords;
    let scale = target.extent();
    let norm = |p: &Point3| (p.coords - center) / scale;
    let y: Vec<Vec3> = source.points.iter().map(norm).collect();
    let x: Vec<Vec3> = target.points.iter().map(norm).collect();
    let (m, n) = (y.len(), x.len());
    let dim = 3.0;

    let two_beta2 = 2.0 * cfg.beta * cfg.beta;
    let g = DMatrix::from_fn(m, m, |i, j| (-(y[i] - y[j]).norm_squared() / two_beta2).exp());

    let mut w = DMatrix::<f64>::zeros(m, 3);
    let mut t = y.clone();
    let mut sigma2 = {
        let mut s = 0.0;
        for yi in &y {
            for xj in &x {
                s += (xj - yi).norm_squared();
            }
        }
        s / (dim * (m * n) as f64)
    };

    let ow = cfg.outlier_weight;
    let log_mix = ((1.0 - ow) / m as f64).ln();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut p = DMatrix::<f64>::zeros(m, n);
    let mut a = vec![0.0; m];

    for _ in 0..cfg.max_iterations {
        iterations += 1;
        // E-step in log space
        let log_c = if ow > 0.0 {
            1.5 * (2.0 * std::f64::consts::PI * sigma2).ln() + (ow / (1.0 - ow)).ln()
                + (m as f64 / n as f64).ln()
        } else {
            f64::NEG_INFINITY
        };
        let mut nll = 0.0;
        for j in 0..n {
            let mut amax = f64::NEG_INFINITY;
            for i in 0..m {
                a[i] = -(x[j] - t[i]).norm_squared() / (2.0 * sigma2);
                amax = amax.max(a[i]);
            }
            let s: f64 = a.iter().map(|v| (v - amax).exp()).sum();
            let log_denom = log_add_exp(amax + s.ln(), log_c);
            for i in 0..m {
                p[(i, j)] = (a[i] - log_denom).exp();
            }
            nll -= log_denom + log_mix - 1.5 * (2.0 * std::f64::consts::PI * sigma2).ln();
        }
        let gw = &g * &w;
        let reg = 0.5 * cfg.lambda * (w.transpose() * &gw).trace();
        let objective = nll + reg;
        if let Some(&prev) = history.last() {
            let change: f64 = prev - objective;
            if change.abs() <= cfg.tolerance * objective.abs().max(1.0) {
                history.push(objective);
                converged = true;
                break;
            }
        }
        history.push(objective);

        // M-step
        let p1: Vec<f64> = (0..m).map(|i| p.row(i).sum()).collect();
        let pt1: Vec<f64> = (0..n).map(|j| p.column(j).sum()).collect();
        let np: f64 = p1.iter().sum();
        if np <= f64::MIN_POSITIVE {
            break;
        }
        let xm = DMatrix::from_fn(n, 3, |j, k| x[j][k]);
        let px = &p * &xm;
        let mut lhs = DMatrix::from_fn(m, m, |i, k| p1[i] * g[(i, k)]);
        for i in 0..m {
            lhs[(i, i)] += cfg.lambda * sigma2;
        }
        let rhs = DMatrix::from_fn(m, 3, |i, k| px[(i, k)] - p1[i] * y[i][k]);
        w = lhs.lu().solve(&rhs).ok_or(Error::DegenerateTarget)?;
        let gw = &g * &w;
        for i in 0..m {
            t[i] = y[i] + Vec3::new(gw[(i, 0)], gw[(i, 1)], gw[(i, 2)]);
        }

        let mut num = 0.0;
        for j in 0..n {
            num += pt1[j] * x[j].norm_squared();
        }
        for i in 0..m {
            let pxi = Vec3::new(px[(i, 0)], px[(i, 1)], px[(i, 2)]);
            num += -2.0 * pxi.dot(&t[i]) + p1[i] * t[i].norm_squared();
        }
        sigma2 = (num / (np * dim)).max(MIN_SIGMA2);
        if sigma2 <= MIN_SIGMA2 {
            converged = true;
            break;
        }
    }

    let displacements = t.iter().zip(&y).map(|(ti, yi)| (ti - yi) * scale).collect();
    Ok(CpdResult {
        field: DisplacementField { displacements },
        converged,
        iterations,
        objective_history: history,
        sigma2: sigma2 * scale * scale,
    })
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
