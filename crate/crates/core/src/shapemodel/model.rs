use std::collections::BTreeMap;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{symmetric_chamfer, Point3, PointCloud, Vec3};
use crate::registration::{cpd_nonrigid, CpdConfig};

/// Training set size the method is designed around.
pub const MIN_TRAINING_INSTANCES: usize = 5;
pub const MAX_TRAINING_INSTANCES: usize = 10;

/// Default latent dimension for `k` training instances.
pub fn default_latent_dim(k: usize) -> usize {
    k.saturating_sub(1).min(4)
}

/// Whitened PCA coordinates of a part shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentVector(pub Vec<f64>);

impl LatentVector {
    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Canonical cloud plus a low-rank deformation basis for one part category.
///
/// A latent `v` reconstructs `canonical + reshape(W · (scales ⊙ v))`, where
/// `W` has orthonormal columns. Point `i` of every reconstruction corresponds
/// to point `i` of the canonical cloud, so labels carry over unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelWire", into = "ModelWire")]
pub struct CanonicalPartModel {
    pub part_category: String,
    pub canonical: PointCloud,
    basis: DMatrix<f64>,
    pub latent_mean: DVector<f64>,
    pub latent_scales: DVector<f64>,
    /// K×d, one row per training instance.
    pub training_latents: DMatrix<f64>,
    /// Fraction of displacement variance per retained component.
    pub variance_ratios: Vec<f64>,
    /// Per-instance RMS point error of reconstructing its latent.
    pub truncation_residuals: Vec<f64>,
    pub canonical_instance: usize,
    /// Neighboring part categories whose adjacency labels the canonical cloud carries.
    pub adjacency: Vec<String>,
    pub cpd: CpdConfig,
}

impl CanonicalPartModel {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn num_points(&self) -> usize {
        self.canonical.len()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn training_latent(&self, j: usize) -> LatentVector {
        LatentVector(self.training_latents.row(j).iter().copied().collect())
    }

    pub fn mean_latent(&self) -> LatentVector {
        LatentVector(self.latent_mean.iter().copied().collect())
    }

    /// Mean per-point squared displacement over the training set; the natural
    /// unit for comparing fit quality against latent regularization.
    pub fn displacement_variance(&self) -> f64 {
        let n = self.num_points().max(1) as f64;
        let k = self.training_latents.nrows();
        let mut total = 0.0;
        for j in 0..k {
            for c in 0..self.dim() {
                let a = self.training_latents[(j, c)] * self.latent_scales[c];
                total += a * a;
            }
        }
        total / (k.max(1) as f64 * n)
    }

    pub fn extent(&self) -> f64 {
        self.canonical.extent()
    }

    pub fn reconstruct(&self, v: &LatentVector) -> Result<PointCloud> {
        let mut points = Vec::new();
        self.reconstruct_into(&v.0, &mut points)?;
        PointCloud::with_labels(points, self.canonical.labels().clone())
    }

    /// Reconstructed points only, written into `out`.
    pub fn reconstruct_into(&self, v: &[f64], out: &mut Vec<Point3>) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        out.clear();
        out.extend_from_slice(&self.canonical.points);
        for (c, &vc) in v.iter().enumerate() {
            let a = vc * self.latent_scales[c];
            if a == 0.0 {
                continue;
            }
            let col = self.basis.column(c);
            for (i, p) in out.iter_mut().enumerate() {
                *p += a * Vec3::new(col[3 * i], col[3 * i + 1], col[3 * i + 2]);
            }
        }
        Ok(())
    }
}

/// Index of the instance with the smallest summed symmetric Chamfer distance to all others.
pub fn select_canonical(instances: &[PointCloud]) -> Result<usize> {
    if instances.len() < 2 {
        return Err(Error::Invalid("canonical selection needs at least 2 instances".into()));
    }
    let k = instances.len();
    let mut table = vec![0.0; k * k];
    for i in 0..k {
        for j in i + 1..k {
            let d = symmetric_chamfer(&instances[i], &instances[j])?;
            table[i * k + j] = d;
            table[j * k + i] = d;
        }
    }
    let mut best = (f64::INFINITY, 0);
    for i in 0..k {
        let s: f64 = table[i * k..(i + 1) * k].iter().sum();
        if s < best.0 {
            best = (s, i);
        }
    }
    Ok(best.1)
}

/// Trains a part model from pose-aligned instances.
///
/// `instances` should already carry their relational labels; the canonical
/// instance's labels are baked into the model. `adjacency` names the neighbor
/// parts those labels refer to.
pub fn train_part_model(
    part_category: &str,
    instances: &[PointCloud],
    adjacency: &[String],
    d: usize,
    cpd: &CpdConfig,
) -> Result<CanonicalPartModel> {
    let k = instances.len();
    if !(MIN_TRAINING_INSTANCES..=MAX_TRAINING_INSTANCES).contains(&k) {
        warn!(
            "part `{part_category}`: {k} training instances outside the intended range {MIN_TRAINING_INSTANCES}-{MAX_TRAINING_INSTANCES}"
        );
    }
    if k < 2 {
        return Err(Error::Invalid(format!(
            "part `{part_category}` needs at least 2 training instances, got {k}"
        )));
    }
    if d == 0 || d > k - 1 {
        return Err(Error::Invalid(format!(
            "latent dimension {d} must lie in 1..={}",
            k - 1
        )));
    }
    for c in instances {
        c.ensure_non_empty()?;
        c.validate()?;
    }

    let canon_idx = select_canonical(instances)?;
    let canonical = instances[canon_idx].clone();
    let n = canonical.len();

    let mut displacements = DMatrix::<f64>::zeros(3 * n, k);
    for (j, inst) in instances.iter().enumerate() {
        // the canonical instance is its own reference
        if j == canon_idx || inst.points == canonical.points {
            continue;
        }
        let result = cpd_nonrigid(&canonical, inst, cpd).map_err(|e| Error::InstanceRegistration {
            instance: j,
            source: Box::new(e),
        })?;
        if !result.converged {
            warn!("part `{part_category}`: registration of instance {j} hit the iteration cap");
        }
        for (i, v) in result.field.flatten().into_iter().enumerate() {
            displacements[(i, j)] = v;
        }
    }

    let mean = displacements.column_mean();
    let mut centered = displacements.clone();
    for j in 0..k {
        let mut col = centered.column_mut(j);
        col -= &mean;
    }
    let svd = centered.clone().svd(true, false);
    let u = svd.u.ok_or_else(|| Error::Invalid("PCA failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let total_var: f64 = svd.singular_values.iter().map(|s| s * s).sum();

    let extent = canonical.extent();
    let scale_floor = 1e-6 * extent.max(f64::MIN_POSITIVE);
    let mut basis = DMatrix::<f64>::zeros(3 * n, d);
    let mut scales = DVector::<f64>::zeros(d);
    let mut variance_ratios = Vec::with_capacity(d);
    for (c, &src) in order.iter().take(d).enumerate() {
        basis.set_column(c, &u.column(src));
        let s = svd.singular_values[src];
        scales[c] = (s / ((k - 1) as f64).sqrt()).max(scale_floor);
        variance_ratios.push(if total_var > 0.0 { s * s / total_var } else { 0.0 });
    }

    let projected = basis.transpose() * &displacements; // d×K
    let mut latents = DMatrix::<f64>::zeros(k, d);
    for j in 0..k {
        for c in 0..d {
            latents[(j, c)] = projected[(c, j)] / scales[c];
        }
    }
    let latent_mean = DVector::from_iterator(d, (0..d).map(|c| latents.column(c).mean()));

    let residual_vecs = &displacements - &basis * &projected;
    let truncation_residuals = (0..k)
        .map(|j| (residual_vecs.column(j).norm_squared() / n as f64).sqrt())
        .collect();

    Ok(CanonicalPartModel {
        part_category: part_category.to_string(),
        canonical,
        basis,
        latent_mean,
        latent_scales: scales,
        training_latents: latents,
        variance_ratios,
        truncation_residuals,
        canonical_instance: canon_idx,
        adjacency: adjacency.to_vec(),
        cpd: *cpd,
    })
}

#[derive(Serialize, Deserialize)]
struct ModelWire {
    part_category: String,
    canonical: PointCloud,
    /// Row-major, shape `[3n, d]`.
    basis: Vec<Vec<f64>>,
    latent_mean: Vec<f64>,
    latent_scales: Vec<f64>,
    training_latents: Vec<Vec<f64>>,
    variance_ratios: Vec<f64>,
    truncation_residuals: Vec<f64>,
    canonical_instance: usize,
    adjacency: Vec<String>,
    cpd: CpdConfig,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(r: &[Vec<f64>], ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if r.iter().any(|row| row.len() != ncols) {
        return Err(Error::Invalid(format!("{what}: ragged rows")));
    }
    Ok(DMatrix::from_fn(r.len(), ncols, |i, j| r[i][j]))
}

impl From<CanonicalPartModel> for ModelWire {
    fn from(m: CanonicalPartModel) -> Self {
        ModelWire {
            part_category: m.part_category,
            canonical: m.canonical,
            basis: rows(&m.basis),
            latent_mean: m.latent_mean.iter().copied().collect(),
            latent_scales: m.latent_scales.iter().copied().collect(),
            training_latents: rows(&m.training_latents),
            variance_ratios: m.variance_ratios,
            truncation_residuals: m.truncation_residuals,
            canonical_instance: m.canonical_instance,
            adjacency: m.adjacency,
            cpd: m.cpd,
        }
    }
}

impl TryFrom<ModelWire> for CanonicalPartModel {
    type Error = Error;

    fn try_from(w: ModelWire) -> Result<Self> {
        let d = w.latent_mean.len();
        let n = w.canonical.len();
        let basis = from_rows(&w.basis, d, "basis")?;
        if basis.nrows() != 3 * n {
            return Err(Error::DimensionMismatch {
                expected: 3 * n,
                got: basis.nrows(),
            });
        }
        if w.latent_scales.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: w.latent_scales.len(),
            });
        }
        Ok(CanonicalPartModel {
            part_category: w.part_category,
            canonical: w.canonical,
            basis,
            latent_mean: DVector::from_vec(w.latent_mean),
            latent_scales: DVector::from_vec(w.latent_scales),
            training_latents: from_rows(&w.training_latents, d, "training_latents")?,
            variance_ratios: w.variance_ratios,
            truncation_residuals: w.truncation_residuals,
            canonical_instance: w.canonical_instance,
            adjacency: w.adjacency,
            cpd: w.cpd,
        })
    }
}

/// Part models keyed by part category.
pub type ModelSet = BTreeMap<String, CanonicalPartModel>;
