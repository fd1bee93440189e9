use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::model::{CanonicalPartModel, LatentVector};
use super::search::PatternSearch;
use crate::error::{Error, Result};
use crate::registration::kabsch;
use nalgebra::{DMatrix, DVector};

use crate::geom::{partition, ChamferTarget, Match, ClassPartition, NeighborIndex, Point3, PointCloud, RigidTransform, Vec3, Z_KEY};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    /// Latent seeds per yaw: the zero vector plus `restarts - 1` random draws.
    pub restarts: usize,
    pub yaw_init_count: usize,
    /// Objective evaluations allowed per local search.
    pub max_evals: usize,
    /// Weight of `‖v − mean‖²` (whitened units).
    pub latent_reg_weight: f64,
    /// Final step size relative to the initial steps.
    pub step_tolerance: f64,
    /// Step size at which every local search pauses before the best few are refined.
    pub coarse_tolerance: f64,
    /// Number of coarse results refined down to `step_tolerance`.
    pub refine_top: usize,
    /// Observed clouds are strided down to this many points.
    pub max_observed_points: usize,
    /// Point budget of the cheaper objective used during the coarse phase.
    pub coarse_observed_points: usize,
    pub seed: u64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            restarts: 3,
            yaw_init_count: 8,
            max_evals: 2000,
            latent_reg_weight: 0.01,
            step_tolerance: 1e-3,
            coarse_tolerance: 1.0 / 16.0,
            refine_top: 3,
            max_observed_points: 200,
            coarse_observed_points: 60,
            seed: 0,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0
            || self.yaw_init_count == 0
            || self.max_evals == 0
            || self.max_observed_points == 0
            || self.coarse_observed_points == 0
        {
            return Err(Error::Invalid(
                "inference restarts, yaw_init_count, max_evals and point budgets must be ≥ 1".into(),
            ));
        }
        if !(self.latent_reg_weight >= 0.0) {
            return Err(Error::Invalid("latent_reg_weight must be ≥ 0".into()));
        }
        if !(self.step_tolerance > 0.0) || !(self.coarse_tolerance > 0.0) {
            return Err(Error::Invalid("step tolerances must be > 0".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub latent: LatentVector,
    /// Canonical frame → world.
    pub pose: RigidTransform,
    pub objective: f64,
    pub converged: bool,
}

impl InferenceResult {
    /// Reconstruction at the fitted latent, placed by the fitted pose.
    pub fn posed_reconstruction(&self, model: &CanonicalPartModel) -> Result<PointCloud> {
        Ok(self.pose.apply_cloud(&model.reconstruct(&self.latent)?))
    }
}

/// ICP rounds spent polishing the best local search.
const POLISH_ITERATIONS: usize = 200;

/// Label keys entering the inference objective: the adjacency keys plus the z key.
pub fn objective_keys(adjacency_keys: &[String]) -> Vec<String> {
    let mut keys: Vec<String> = adjacency_keys.to_vec();
    keys.push(Z_KEY.to_string());
    keys.sort();
    keys.dedup();
    keys
}

/// Joint latent + pose objective for one observed part.
pub struct FitObjective<'a> {
    model: &'a CanonicalPartModel,
    observed: Vec<Point3>,
    parts: Vec<ClassPartition>,
    keys: Vec<String>,
    scale: f64,
    reg_weight: f64,
    /// Targets of the most recent latents, newest last. A rejected latent
    /// poll is followed by a return to the base latent, so two slots suffice.
    cache: Vec<(Vec<f64>, ChamferTarget)>,
    recon: Vec<Point3>,
    local: Vec<Point3>,
}

impl<'a> FitObjective<'a> {
    pub fn new(
        model: &'a CanonicalPartModel,
        observed: &PointCloud,
        keys: Vec<String>,
        reg_weight: f64,
        max_points: usize,
    ) -> Result<Self> {
        observed.ensure_non_empty()?;
        for key in &keys {
            observed.label(key)?;
            model.canonical.label(key).map_err(|e| e.context(format!("model `{}`", model.part_category)))?;
        }
        let obs = observed.downsample(max_points);
        let parts = partition(&obs, &keys)?;
        let canon_parts = partition(&model.canonical, &keys)?;
        for (p, c) in parts.iter().zip(&canon_parts) {
            for class in 0..2 {
                if !p.classes[class].is_empty() && c.classes[class].is_empty() {
                    return Err(Error::UnmatchedLabelClass {
                        key: p.key.clone().unwrap_or_default(),
                        value: class as u8,
                    });
                }
            }
        }
        let extent = model.extent();
        let scale = model.displacement_variance().max((1e-3 * extent).powi(2));
        Ok(FitObjective {
            model,
            observed: obs.points,
            parts,
            keys,
            scale,
            reg_weight,
            cache: Vec::with_capacity(2),
            recon: Vec::new(),
            local: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.model.dim() + 6
    }

    pub fn observed_centroid(&self) -> Point3 {
        let n = self.observed.len() as f64;
        Point3::from(self.observed.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / n)
    }

    pub fn decode(&self, x: &[f64]) -> (LatentVector, RigidTransform) {
        let d = self.model.dim();
        let pose = RigidTransform::from_euler(x[d], x[d + 1], x[d + 2], Vec3::new(x[d + 3], x[d + 4], x[d + 5]));
        (LatentVector(x[..d].to_vec()), pose)
    }

    pub fn encode(latent: &LatentVector, yaw: f64, pitch: f64, roll: f64, t: Vec3) -> Vec<f64> {
        let mut x = latent.0.clone();
        x.extend_from_slice(&[yaw, pitch, roll, t.x, t.y, t.z]);
        x
    }

    pub fn evaluate(&mut self, latent: &LatentVector, pose: &RigidTransform) -> Result<f64> {
        let slot = match self.cache.iter().position(|(l, _)| *l == latent.0) {
            Some(i) => i,
            None => {
                self.model.reconstruct_into(&latent.0, &mut self.recon)?;
                let cloud = PointCloud::with_labels(std::mem::take(&mut self.recon), self.model.canonical.labels().clone())?;
                let target = ChamferTarget::new(&cloud, &self.keys)?;
                self.recon = cloud.points;
                if self.cache.len() == 2 {
                    self.cache.remove(0);
                }
                self.cache.push((latent.0.clone(), target));
                self.cache.len() - 1
            }
        };
        let inv = pose.inverse();
        self.local.clear();
        self.local.extend(self.observed.iter().map(|p| inv.apply(p)));
        let data = self.cache[slot].1.cost(&self.local, &self.parts)?;
        let reg: f64 = latent
            .0
            .iter()
            .zip(self.model.latent_mean.iter())
            .map(|(v, m)| (v - m) * (v - m))
            .sum();
        Ok(data / self.scale + self.reg_weight * reg)
    }

    /// Labeled ICP over pose and shape: alternates correspondences with a
    /// weighted Kabsch step on the pose and a ridge solve on the latent (the
    /// reconstruction is affine in it). Only improving steps are kept. The
    /// flag reports whether it stopped on a stalled gain rather than the cap.
    pub fn polish(
        &mut self,
        latent: LatentVector,
        pose: RigidTransform,
        max_iterations: usize,
    ) -> Result<(LatentVector, RigidTransform, f64, bool)> {
        let (mut latent, mut pose) = (latent, pose);
        let mut value = self.evaluate(&latent, &pose)?;
        for _ in 0..max_iterations {
            let start = value;
            if let Some(next) = self.pose_step(&latent)? {
                let v = self.evaluate(&latent, &next)?;
                if v < value {
                    pose = next;
                    value = v;
                }
            }
            self.evaluate(&latent, &pose)?;
            if let Some(next) = self.latent_step(&latent)? {
                let v = self.evaluate(&next, &pose)?;
                if v < value {
                    latent = next;
                    value = v;
                }
            }
            // leave `local` and the cache consistent with the accepted state
            self.evaluate(&latent, &pose)?;
            if !(start - value > 1e-9 * value.max(f64::MIN_POSITIVE)) {
                return Ok((latent, pose, value, true));
            }
        }
        Ok((latent, pose, value, false))
    }

    fn current_matches(&self, latent: &LatentVector) -> Result<Vec<Match>> {
        let slot = self.cache.iter().position(|(l, _)| *l == latent.0).expect("latent evaluated before matching");
        self.cache[slot].1.matches(&self.local, &self.parts)
    }

    /// Kabsch on the current correspondences.
    fn pose_step(&self, latent: &LatentVector) -> Result<Option<RigidTransform>> {
        let matches = self.current_matches(latent)?;
        let recon = self.model.reconstruct(latent)?;
        let pairs: Vec<(Point3, Point3)> = matches.iter().map(|m| (recon.points[m.target], self.observed[m.source])).collect();
        let weights: Vec<f64> = matches.iter().map(|m| m.weight).collect();
        Ok(kabsch(&pairs, Some(&weights)).ok())
    }

    /// Minimizes the objective over the latent with correspondences and pose fixed.
    fn latent_step(&self, latent: &LatentVector) -> Result<Option<LatentVector>> {
        let d = self.model.dim();
        if d == 0 {
            return Ok(None);
        }
        let matches = self.current_matches(latent)?;
        let basis = self.model.basis();
        let canon = &self.model.canonical.points;
        let mut lhs = DMatrix::<f64>::zeros(d, d);
        let mut rhs = DVector::<f64>::zeros(d);
        for m in &matches {
            let t = m.target;
            let r = self.local[m.source] - canon[t];
            let mut jac = nalgebra::Matrix3xX::<f64>::zeros(d);
            for c in 0..d {
                let s = self.model.latent_scales[c];
                for k in 0..3 {
                    jac[(k, c)] = basis[(3 * t + k, c)] * s;
                }
            }
            let w = m.weight / self.scale;
            lhs += w * jac.transpose() * &jac;
            rhs += w * jac.transpose() * r;
        }
        for c in 0..d {
            lhs[(c, c)] += self.reg_weight;
            rhs[c] += self.reg_weight * self.model.latent_mean[c];
        }
        Ok(lhs.cholesky().map(|ch| LatentVector(ch.solve(&rhs).iter().copied().collect())))
    }

    fn eval_vec(&mut self, x: &[f64]) -> f64 {
        let (latent, pose) = self.decode(x);
        self.evaluate(&latent, &pose).unwrap_or(f64::INFINITY)
    }

    fn steps(&self) -> Vec<f64> {
        let mut s = vec![1.0; self.model.dim()];
        let t = 0.05 * self.model.extent();
        s.extend_from_slice(&[0.3, 0.3, 0.3, t, t, t]);
        s
    }
}

/// Starting points of the local searches as (latent, yaw, translation):
/// every latent seed at every yaw, translated so the reconstruction centroid
/// lands on `centroid`. The first seed is the zero latent.
pub fn initializations(
    model: &CanonicalPartModel,
    centroid: &Point3,
    cfg: &InferenceConfig,
) -> Result<Vec<(LatentVector, f64, Vec3)>> {
    cfg.validate()?;
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut seeds = vec![LatentVector::zeros(d)];
    for _ in 1..cfg.restarts {
        seeds.push(LatentVector(
            (0..d)
                .map(|c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    model.latent_mean[c] + z
                })
                .collect(),
        ));
    }
    let mut out = Vec::with_capacity(seeds.len() * cfg.yaw_init_count);
    let mut recon = Vec::new();
    for seed in seeds {
        model.reconstruct_into(&seed.0, &mut recon)?;
        let rc = recon.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / recon.len() as f64;
        for k in 0..cfg.yaw_init_count {
            let yaw = 2.0 * std::f64::consts::PI * k as f64 / cfg.yaw_init_count as f64;
            let r = RigidTransform::from_euler(yaw, 0.0, 0.0, Vec3::zeros());
            out.push((seed.clone(), yaw, centroid.coords - r.apply_vector(&rc)));
        }
    }
    Ok(out)
}

/// Frame the search runs in: origin at the centroid of the (downsampled)
/// observation, x along its principal horizontal axis, signed so the third
/// moment along x is non-negative. It moves with the observation under yaw
/// and translation, which makes the fit equivariant under those motions.
pub fn observation_frame(observed: &PointCloud, max_points: usize) -> Result<RigidTransform> {
    observed.ensure_non_empty()?;
    let obs = observed.downsample(max_points);
    let c = obs.centroid();
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in &obs.points {
        let d = p - c;
        sxx += d.x * d.x;
        syy += d.y * d.y;
        sxy += d.x * d.y;
    }
    let mut phi = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (s, co) = phi.sin_cos();
    let m3: f64 = obs.points.iter().map(|p| (co * (p.x - c.x) + s * (p.y - c.y)).powi(3)).sum();
    if m3 < 0.0 {
        phi += std::f64::consts::PI;
    }
    Ok(RigidTransform::from_euler(phi, 0.0, 0.0, c.coords))
}

/// Fits latent shape and pose of `model` to an observed, labeled part cloud.
pub fn infer(
    model: &CanonicalPartModel,
    observed: &PointCloud,
    adjacency_keys: &[String],
    cfg: &InferenceConfig,
) -> Result<InferenceResult> {
    cfg.validate()?;
    let frame = observation_frame(observed, cfg.max_observed_points)?;
    let observed = &frame.inverse().apply_cloud(observed);
    let keys = objective_keys(adjacency_keys);
    let mut objective = FitObjective::new(model, observed, keys.clone(), cfg.latent_reg_weight, cfg.max_observed_points)?;
    let coarse_points = cfg.coarse_observed_points.min(cfg.max_observed_points);
    let mut coarse = FitObjective::new(model, observed, keys, cfg.latent_reg_weight, coarse_points)?;
    let d = model.dim();

    let starts: Vec<Vec<f64>> = initializations(model, &Point3::origin(), cfg)?
        .into_iter()
        .map(|(latent, yaw, t)| FitObjective::encode(&latent, yaw, 0.0, 0.0, t))
        .collect();
    let steps = objective.steps();
    // The coarse phase searches pose only; each seed's shape stays fixed.
    let mut pose_steps = steps.clone();
    pose_steps[..d].fill(0.0);
    let mut searches = Vec::with_capacity(starts.len());
    {
        let mut f = |x: &[f64]| coarse.eval_vec(x);
        for x0 in &starts {
            let mut s = PatternSearch::new(x0.clone(), pose_steps.clone(), &mut f);
            s.run(&mut f, cfg.coarse_tolerance, cfg.max_evals);
            searches.push(s);
        }
    }
    let coarse_evals: usize = searches.iter().map(|s| s.evals).sum();

    // The best coarse results continue on the full objective.
    let mut order: Vec<usize> = (0..searches.len()).collect();
    order.sort_by(|&a, &b| searches[a].value.total_cmp(&searches[b].value).then(a.cmp(&b)));
    let mut f = |x: &[f64]| objective.eval_vec(x);
    let mut refined = Vec::new();
    for &i in order.iter().take(cfg.refine_top.max(1)) {
        let c = &searches[i];
        let mut s = PatternSearch::new(c.x.clone(), steps.clone(), &mut f);
        s.scale = c.scale;
        s.evals += c.evals;
        let done = s.run(&mut f, cfg.step_tolerance, cfg.max_evals);
        refined.push((s, done));
    }
    debug!(
        "part `{}`: {} coarse evals, {} refine evals",
        model.part_category,
        coarse_evals,
        refined.iter().map(|(s, _)| s.evals).sum::<usize>()
    );
    let searches = refined;

    let mut best: Option<usize> = None;
    for (i, (s, _)) in searches.iter().enumerate() {
        if s.value.is_finite() && best.is_none_or(|b| s.value < searches[b].0.value) {
            best = Some(i);
        }
    }
    let Some(b) = best else {
        return Err(Error::InferenceFailed(format!(
            "all {} local searches diverged for part `{}`",
            searches.len(),
            model.part_category
        )));
    };
    let s = &searches[b].0;
    let mut x = s.x.clone();
    // The coarse phase ran on a cheaper objective; never return something
    // worse than a starting point under the full one.
    let mut value = s.value;
    for x0 in &starts {
        let v = objective.eval_vec(x0);
        if v < value {
            value = v;
            x = x0.clone();
        }
    }
    let (latent, pose) = objective.decode(&x);
    let (latent, pose, value, converged) = objective.polish(latent, pose.renormalized(), POLISH_ITERATIONS)?;
    Ok(InferenceResult {
        latent,
        pose: frame.compose(&pose).renormalized(),
        objective: value,
        converged,
    })
}

/// Indices of the posed reconstruction nearest to each demonstration point (ties → lowest index).
pub fn warp_point_indices(
    model: &CanonicalPartModel,
    fit: &InferenceResult,
    points: &[Point3],
) -> Result<Vec<usize>> {
    let posed = fit.posed_reconstruction(model)?;
    let index = NeighborIndex::new(&posed.points);
    Ok(points.iter().map(|p| index.nearest(p).unwrap().0).collect())
}

#[cfg(test)]
mod tests {
    use std::sync::OnceLock;

    use super::*;
    use crate::geom::adjacency_key;
    use crate::synth::{generate, Category, Family};
    use crate::transfer::{train_category, CategoryModels, PartDecomposedObject, TrainConfig};
    use proptest::prelude::*;

    const HANDLE: &str = "handle";

    fn mugs() -> &'static (Vec<PartDecomposedObject>, CategoryModels) {
        static CELL: OnceLock<(Vec<PartDecomposedObject>, CategoryModels)> = OnceLock::new();
        CELL.get_or_init(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let train: Vec<_> = (0..5)
                .map(|_| generate(&Family::Training.sample(Category::Mug, &mut rng), 150).unwrap().object)
                .collect();
            let cfg = TrainConfig { max_points: 150, ..TrainConfig::default() };
            let models = train_category(&train, &cfg).unwrap();
            let labeled = train.iter().map(|o| models.label(o).unwrap()).collect();
            (labeled, models)
        })
    }

    fn handle_model() -> &'static CanonicalPartModel {
        mugs().1.model(HANDLE).unwrap()
    }

    fn keys() -> Vec<String> {
        vec![adjacency_key("cup")]
    }

    fn small_cfg(seed: u64) -> InferenceConfig {
        InferenceConfig {
            restarts: 2,
            yaw_init_count: 4,
            max_evals: 400,
            max_observed_points: 80,
            coarse_observed_points: 40,
            refine_top: 1,
            seed,
            ..InferenceConfig::default()
        }
    }

    /// Instance `j` as the model reproduces it, with the canonical labels.
    fn warped(j: usize) -> PointCloud {
        let m = handle_model();
        m.reconstruct(&m.training_latent(j)).unwrap()
    }

    /// Without the prior the model's own clouds are exact optima.
    fn unregularized(seed: u64) -> InferenceConfig {
        InferenceConfig { latent_reg_weight: 0.0, ..InferenceConfig::default().with_seed(seed) }
    }

    fn pose_error(a: &RigidTransform, b: &RigidTransform, extent: f64) -> (f64, f64) {
        (a.rotation_distance(b).to_degrees(), a.translation_distance(b) / extent)
    }

    #[test]
    fn self_fit_returns_canonical() {
        let m = handle_model();
        let fit = infer(m, &m.canonical, &keys(), &unregularized(0)).unwrap();
        let scale = (0..m.training_latents.nrows()).map(|j| m.training_latent(j).norm()).sum::<f64>()
            / m.training_latents.nrows() as f64;
        assert!(fit.latent.norm() < 0.1 * scale, "{:?} vs {scale}", fit.latent);
        let (r, t) = pose_error(&fit.pose, &RigidTransform::identity(), 1.0);
        assert!(r.to_radians() < 1e-3 && t < 1e-3, "{r} {t}");
    }

    #[test]
    fn recovers_training_instance_under_known_pose() {
        let m = handle_model();
        let extent = m.extent();
        let truth = RigidTransform::from_euler(2.1, 0.05, -0.03, Vec3::new(0.3, -0.2, 0.1));
        for j in [0, 1, 3, 4] {
            let observed = truth.apply_cloud(&warped(j));
            let fit = infer(m, &observed, &keys(), &unregularized(j as u64)).unwrap();
            let (r, t) = pose_error(&fit.pose, &truth, extent);
            assert!(r < 2.0 && t < 0.01, "instance {j}: {r:.2} deg, {t:.4}");
            let dv: f64 = fit
                .latent
                .0
                .iter()
                .zip(m.training_latent(j).0.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(dv < 0.05, "instance {j}: latent off by {dv}");
        }
    }

    #[test]
    fn equivariant_under_rigid_motion() {
        let m = handle_model();
        let extent = m.extent();
        let observed = &warped(1);
        let cfg = InferenceConfig::default().with_seed(7);
        let base = infer(m, observed, &keys(), &cfg).unwrap();
        for (yaw, t) in [(0.7, Vec3::new(0.1, 0.0, 0.0)), (-2.5, Vec3::new(-0.2, 0.3, 0.05))] {
            let g = RigidTransform::from_euler(yaw, 0.0, 0.0, t);
            let moved = infer(m, &g.apply_cloud(observed), &keys(), &cfg).unwrap();
            let back = g.inverse().compose(&moved.pose);
            let (r, dt) = pose_error(&back, &base.pose, extent);
            assert!(r < 2.0 && dt < 0.01, "yaw {yaw}: {r:.2} deg, {dt:.4}");
        }
    }

    #[test]
    fn initializations_cover_seeds_and_yaws() {
        let m = handle_model();
        let cfg = small_cfg(1);
        let c = Point3::new(0.1, 0.2, 0.3);
        let inits = initializations(m, &c, &cfg).unwrap();
        assert_eq!(inits.len(), cfg.restarts * cfg.yaw_init_count);
        assert!(inits[..cfg.yaw_init_count].iter().all(|(v, _, _)| v.norm() == 0.0));
        for (v, yaw, t) in &inits {
            let pose = RigidTransform::from_euler(*yaw, 0.0, 0.0, *t);
            let rc = m.reconstruct(v).unwrap().centroid();
            assert!((pose.apply(&rc) - c).norm() < 1e-12);
        }
        assert_eq!(inits, initializations(m, &c, &cfg).unwrap());
    }

    #[test]
    fn invalid_inputs_are_errors() {
        let m = handle_model();
        let cfg = InferenceConfig { restarts: 0, ..InferenceConfig::default() };
        assert!(infer(m, &m.canonical, &keys(), &cfg).is_err());
        let empty = PointCloud::new(vec![]);
        assert!(infer(m, &empty, &keys(), &InferenceConfig::default()).is_err());
    }

    #[test]
    fn warp_index_of_exact_point() {
        let m = handle_model();
        let fit = InferenceResult {
            latent: LatentVector::zeros(m.dim()),
            pose: RigidTransform::from_translation(Vec3::new(1.0, 0.0, 0.0)),
            objective: 0.0,
            converged: true,
        };
        let posed = fit.posed_reconstruction(m).unwrap();
        let idx: Vec<usize> = (0..posed.len()).step_by(7).collect();
        let pts: Vec<Point3> = idx.iter().map(|&i| posed.points[i]).collect();
        assert_eq!(warp_point_indices(m, &fit, &pts).unwrap(), idx);
    }

    #[test]
    fn warp_index_tie_goes_to_lower_index() {
        let m = handle_model();
        let fit = InferenceResult {
            latent: LatentVector::zeros(m.dim()),
            pose: RigidTransform::identity(),
            objective: 0.0,
            converged: true,
        };
        let p = &m.canonical.points;
        // the midpoint of the closest pair is equidistant from both and nearer than anything else
        let (mut best, mut pair) = (f64::INFINITY, (0, 0));
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                let d = (p[i] - p[j]).norm();
                if d < best {
                    best = d;
                    pair = (i, j);
                }
            }
        }
        let mid = Point3::from((p[pair.0].coords + p[pair.1].coords) / 2.0);
        let got = warp_point_indices(m, &fit, &[mid]).unwrap()[0];
        let (di, dj) = ((p[pair.0] - mid).norm_squared(), (p[pair.1] - mid).norm_squared());
        let expect = if di < dj { pair.0 } else if dj < di { pair.1 } else { pair.0 };
        assert_eq!(got, expect);
    }

    #[test]
    fn warp_index_round_trip_across_latents() {
        let m = handle_model();
        let a = InferenceResult {
            latent: m.training_latent(1),
            pose: RigidTransform::from_euler(0.4, 0.0, 0.0, Vec3::new(0.0, 0.1, 0.0)),
            objective: 0.0,
            converged: true,
        };
        let b = InferenceResult {
            latent: m.training_latent(3),
            pose: RigidTransform::from_euler(-1.0, 0.1, 0.0, Vec3::new(0.2, 0.0, 0.0)),
            objective: 0.0,
            converged: true,
        };
        let idx: Vec<usize> = (0..m.num_points()).step_by(5).collect();
        let on_b = b.posed_reconstruction(m).unwrap();
        let pts: Vec<Point3> = idx.iter().map(|&i| on_b.points[i]).collect();
        assert_eq!(warp_point_indices(m, &b, &pts).unwrap(), idx);
        let on_a = a.posed_reconstruction(m).unwrap();
        let back: Vec<Point3> = idx.iter().map(|&i| on_a.points[i]).collect();
        assert_eq!(warp_point_indices(m, &a, &back).unwrap(), idx);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn result_is_no_worse_than_any_start(
            seed in 0u64..1000,
            yaw in -std::f64::consts::PI..std::f64::consts::PI,
            tx in -0.2f64..0.2,
            j in 0usize..5,
        ) {
            let (train, _) = mugs();
            let m = handle_model();
            let cfg = small_cfg(seed);
            let g = RigidTransform::from_euler(yaw, 0.0, 0.0, Vec3::new(tx, 0.0, 0.0));
            let observed = g.apply_cloud(train[j].part(HANDLE).unwrap());
            let fit = infer(m, &observed, &keys(), &cfg).unwrap();
            let mut obj = FitObjective::new(m, &observed, objective_keys(&keys()), cfg.latent_reg_weight, cfg.max_observed_points).unwrap();
            prop_assert!((obj.evaluate(&fit.latent, &fit.pose).unwrap() - fit.objective).abs() <= 1e-9 * fit.objective.max(1.0));
            let frame = observation_frame(&observed, cfg.max_observed_points).unwrap();
            for (v, yaw0, t) in initializations(m, &Point3::origin(), &cfg).unwrap() {
                let at = obj.evaluate(&v, &frame.compose(&RigidTransform::from_euler(yaw0, 0.0, 0.0, t))).unwrap();
                prop_assert!(fit.objective <= at + 1e-12, "{} > {}", fit.objective, at);
            }
        }
    }
}
