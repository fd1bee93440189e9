use std::collections::BTreeMap;

use log::debug;
use serde::{Deserialize, Serialize};

use super::interaction::{
    align_pair, extract_interaction_points, transfer_points, world_displacements, FitSet, InteractionPointSet,
};
use super::models::{as_whole_object, train_category, CategoryModels, TrainConfig};
use super::object::{Demonstration, PartDecomposedObject};
use super::placement::{optimize_placement, PlacementConfig, PlacementTerm};
use crate::error::{Error, Result};
use crate::geom::{joint_extent, Point3, RigidTransform};
use crate::shapemodel::{infer, objective_keys, InferenceConfig};

/// Largest number of interaction-bearing relations enumerated exhaustively.
pub const MAX_RELATIONS: usize = 12;

/// Default interaction radius as a fraction of the combined bounding-box diagonal.
pub const DEFAULT_DELTA_FRACTION: f64 = 0.02;
pub const DEFAULT_K_MAX: usize = 32;

pub type Relation = (String, String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub inference: InferenceConfig,
    /// Interaction radius relative to the combined diagonal of both objects at the goal.
    pub delta_fraction: f64,
    pub k_max: usize,
    pub placement: PlacementConfig,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            inference: InferenceConfig::default(),
            delta_fraction: DEFAULT_DELTA_FRACTION,
            k_max: DEFAULT_K_MAX,
            placement: PlacementConfig::default(),
        }
    }
}

/// A chosen subset of part relations and how well it recreated the demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationSet {
    pub relations: Vec<Relation>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationTransform {
    pub part_m: String,
    pub part_n: String,
    pub transform: RigidTransform,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferResult {
    pub t_final: RigidTransform,
    pub relations: RelationSet,
    pub per_relation_transforms: Vec<RelationTransform>,
    pub objective: f64,
    pub init_objectives: Vec<f64>,
    /// Placement objective share per part of object A.
    pub part_residuals: BTreeMap<String, f64>,
    /// Shape fits of the novel objects' parts that took part in the placement.
    pub fits_a: FitSet,
    pub fits_b: FitSet,
}

/// Everything extracted once from the demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoAnalysis {
    pub fits_a: FitSet,
    pub fits_b: FitSet,
    /// Independent fits of the interacting parts on a resampled copy of the
    /// demonstration, used to score relation subsets.
    pub check_fits_a: FitSet,
    pub check_fits_b: FitSet,
    pub delta: f64,
    pub interactions: Vec<InteractionPointSet>,
    pub selection: RelationSet,
    /// Score of every candidate subset, in enumeration order.
    pub candidates: Vec<RelationSet>,
}

impl DemoAnalysis {
    pub fn selected_interactions(&self) -> Vec<&InteractionPointSet> {
        self.interactions
            .iter()
            .filter(|ips| self.selection.relations.contains(&ips.relation()))
            .collect()
    }
}

/// Shape fits for every part of an already labeled object.
pub fn fit_object(labeled: &PartDecomposedObject, models: &CategoryModels, cfg: &InferenceConfig) -> Result<FitSet> {
    let mut fits = FitSet::new();
    for (part, cloud) in &labeled.parts {
        let model = models.model(part)?;
        let keys = models.adjacency_keys(part, labeled);
        let fit = infer(model, cloud, &keys, cfg).map_err(|e| e.context(format!("part `{part}`")))?;
        fits.insert(part.clone(), fit);
    }
    Ok(fits)
}

/// Shape fits for the named parts of an already labeled object.
pub fn fit_parts<'a>(
    labeled: &PartDecomposedObject,
    models: &CategoryModels,
    parts: impl IntoIterator<Item = &'a String>,
    cfg: &InferenceConfig,
) -> Result<FitSet> {
    let mut fits = FitSet::new();
    for part in parts {
        if fits.contains_key(part) {
            continue;
        }
        let cloud = labeled.part(part)?;
        let keys = models.adjacency_keys(part, labeled);
        let fit = infer(models.model(part)?, cloud, &keys, cfg).map_err(|e| e.context(format!("part `{part}`")))?;
        fits.insert(part.clone(), fit);
    }
    Ok(fits)
}

/// Every other point of each part, starting from the second: a sparser
/// second observation of the same surfaces.
pub fn resampled(obj: &PartDecomposedObject) -> PartDecomposedObject {
    PartDecomposedObject {
        category: obj.category.clone(),
        parts: obj
            .parts
            .iter()
            .map(|(k, c)| {
                let idx: Vec<usize> = if c.len() < 2 { (0..c.len()).collect() } else { (1..c.len()).step_by(2).collect() };
                (k.clone(), c.select(&idx))
            })
            .collect(),
    }
}

/// Decision-level error of `t` against `t_ab`: centroid displacement over
/// A's extent plus rotation angle over π.
pub fn placement_score(t: &RigidTransform, t_ab: &RigidTransform, centroid: &Point3, extent: f64) -> f64 {
    let trans = (t.apply(centroid) - t_ab.apply(centroid)).norm() / extent;
    trans + t.rotation_distance(t_ab) / std::f64::consts::PI
}

/// Places labeled object A given fits of both objects and a set of relations.
#[allow(clippy::too_many_arguments)]
pub fn place(
    labeled_a: &PartDecomposedObject,
    fits_a: &FitSet,
    fits_b: &FitSet,
    models_a: &CategoryModels,
    models_b: &CategoryModels,
    interactions: &[&InteractionPointSet],
    cfg: &PlacementConfig,
) -> Result<TransferResult> {
    if interactions.is_empty() {
        return Err(Error::Invalid("no relations to place with".into()));
    }
    let mut per_relation = Vec::new();
    let mut terms = Vec::new();
    for ips in interactions {
        let (m, n) = (&ips.part_m, &ips.part_n);
        let fit_m = fits_a.get(m).ok_or_else(|| Error::MissingFit(m.clone()))?;
        let fit_n = fits_b.get(n).ok_or_else(|| Error::MissingFit(n.clone()))?;
        let model_m = models_a.model(m)?;
        let model_n = models_b.model(n)?;
        let pts = transfer_points(ips, fit_m, fit_n, model_m, model_n)?;
        let t = align_pair(&pts, &world_displacements(ips, fit_n)).map_err(|e| e.context(format!("relation ({m}, {n})")))?;
        let observed = labeled_a.part(m)?.clone();
        terms.push(PlacementTerm {
            part: m.clone(),
            target: t.apply_cloud(&fit_m.posed_reconstruction(model_m)?),
            keys: objective_keys(&models_a.adjacency_keys(m, labeled_a)),
            observed,
        });
        per_relation.push(RelationTransform {
            part_m: m.clone(),
            part_n: n.clone(),
            transform: t,
            pairs: ips.pairs.len(),
        });
    }
    let mut inits: Vec<RigidTransform> = per_relation.iter().map(|r| r.transform).collect();
    if inits.len() > 1 {
        inits.extend(RigidTransform::chordal_mean(&inits));
    }
    let placement = optimize_placement(&terms, &inits, cfg)?;
    Ok(TransferResult {
        t_final: placement.transform,
        relations: RelationSet {
            relations: interactions.iter().map(|i| i.relation()).collect(),
            score: f64::NAN,
        },
        per_relation_transforms: per_relation,
        objective: placement.objective,
        init_objectives: placement.init_objectives,
        part_residuals: placement.part_residuals,
        fits_a: fits_a.clone(),
        fits_b: fits_b.clone(),
    })
}

/// Scores every non-empty subset of `interactions` by how well placing the
/// demonstration's object A with it recreates `t_ab`; returns the best
/// (ties to the smaller subset, then lexicographic) and all candidates.
///
/// `labeled_a` and the fits describe the demonstration scene to place in.
/// Passing the very fits the interaction points were extracted from makes
/// every subset exact, so callers score on an independent fit of the scene.
#[allow(clippy::too_many_arguments)]
pub fn select_relevant_relations(
    demo: &Demonstration,
    labeled_a: &PartDecomposedObject,
    fits_a: &FitSet,
    fits_b: &FitSet,
    models_a: &CategoryModels,
    models_b: &CategoryModels,
    interactions: &[InteractionPointSet],
    cfg: &PlacementConfig,
) -> Result<(RelationSet, Vec<RelationSet>)> {
    let k = interactions.len();
    if k == 0 {
        return Err(Error::NoInteraction);
    }
    if k > MAX_RELATIONS {
        return Err(Error::TooManyRelations(k));
    }
    let centroid = demo.object_a.centroid();
    let extent = demo.object_a.extent();
    let mut candidates = Vec::new();
    for mask in 1u32..(1u32 << k) {
        let subset: Vec<&InteractionPointSet> = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| &interactions[i]).collect();
        let relations: Vec<Relation> = subset.iter().map(|i| i.relation()).collect();
        let score = match place(labeled_a, fits_a, fits_b, models_a, models_b, &subset, cfg) {
            Ok(r) => placement_score(&r.t_final, &demo.t_ab, &centroid, extent),
            Err(e) => {
                debug!("relation subset {relations:?} failed: {e}");
                f64::INFINITY
            }
        };
        candidates.push(RelationSet { relations, score });
    }
    let best = candidates
        .iter()
        .min_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then(a.relations.len().cmp(&b.relations.len()))
                .then(a.relations.cmp(&b.relations))
        })
        .cloned()
        .expect("at least one candidate");
    Ok((best, candidates))
}

/// Combined bounding-box diagonal of A at the goal and B.
pub fn goal_extent(demo: &Demonstration) -> f64 {
    let goal = demo.goal_a();
    joint_extent(
        goal.parts
            .values()
            .chain(demo.object_b.parts.values())
            .map(|c| c.points.as_slice()),
    )
}

/// Fits the demonstration, extracts interaction points and selects the relevant relations.
pub fn analyze_demo(
    demo: &Demonstration,
    models_a: &CategoryModels,
    models_b: &CategoryModels,
    cfg: &TransferConfig,
) -> Result<DemoAnalysis> {
    let labeled_a = models_a.label(&demo.object_a)?;
    let labeled_b = models_b.label(&demo.object_b)?;
    let fits_a = fit_object(&labeled_a, models_a, &cfg.inference).map_err(|e| e.context("demo object A"))?;
    let fits_b = fit_object(&labeled_b, models_b, &cfg.inference).map_err(|e| e.context("demo object B"))?;
    let delta = cfg.delta_fraction * goal_extent(demo);
    let interactions = extract_interaction_points(demo, models_a, models_b, &fits_a, &fits_b, delta, cfg.k_max)?;

    let check_cfg = cfg.inference.with_seed(cfg.inference.seed.wrapping_add(1));
    let check_a = models_a.label(&resampled(&demo.object_a))?;
    let check_b = models_b.label(&resampled(&demo.object_b))?;
    let check_fits_a = fit_parts(&check_a, models_a, interactions.iter().map(|i| &i.part_m), &check_cfg)
        .map_err(|e| e.context("resampled demo object A"))?;
    let check_fits_b = fit_parts(&check_b, models_b, interactions.iter().map(|i| &i.part_n), &check_cfg)
        .map_err(|e| e.context("resampled demo object B"))?;
    let (selection, candidates) = select_relevant_relations(
        demo,
        &check_a,
        &check_fits_a,
        &check_fits_b,
        models_a,
        models_b,
        &interactions,
        &cfg.placement,
    )?;
    Ok(DemoAnalysis {
        fits_a,
        fits_b,
        check_fits_a,
        check_fits_b,
        delta,
        interactions,
        selection,
        candidates,
    })
}

/// Predicts the transform that places novel object A relative to novel object B.
pub fn transfer(
    analysis: &DemoAnalysis,
    novel_a: &PartDecomposedObject,
    novel_b: &PartDecomposedObject,
    models_a: &CategoryModels,
    models_b: &CategoryModels,
    cfg: &TransferConfig,
) -> Result<TransferResult> {
    let labeled_a = models_a.label(novel_a)?;
    let labeled_b = models_b.label(novel_b)?;
    let selected = analysis.selected_interactions();
    let fits_a = fit_parts(&labeled_a, models_a, selected.iter().map(|i| &i.part_m), &cfg.inference)
        .map_err(|e| e.context("novel object A"))?;
    let fits_b = fit_parts(&labeled_b, models_b, selected.iter().map(|i| &i.part_n), &cfg.inference)
        .map_err(|e| e.context("novel object B"))?;
    let mut result = place(&labeled_a, &fits_a, &fits_b, models_a, models_b, &selected, &cfg.placement)?;
    result.relations.score = analysis.selection.score;
    Ok(result)
}

/// Models and objects for the single-part baseline.
///
/// The baseline gets the same total point budget as the part-wise method:
/// every per-part budget is multiplied by the number of parts merged.
pub struct WholeObject;

impl WholeObject {
    pub fn object(obj: &PartDecomposedObject) -> PartDecomposedObject {
        as_whole_object(obj, usize::MAX)
    }

    pub fn demo(demo: &Demonstration) -> Demonstration {
        Demonstration {
            object_a: Self::object(&demo.object_a),
            object_b: Self::object(&demo.object_b),
            t_ab: demo.t_ab,
        }
    }

    /// `cfg` with point budgets scaled for an object of `parts` parts.
    pub fn transfer_config(cfg: &TransferConfig, parts: usize) -> TransferConfig {
        let k = parts.max(1);
        let mut out = *cfg;
        out.inference.max_observed_points = cfg.inference.max_observed_points.saturating_mul(k);
        out.inference.coarse_observed_points = cfg.inference.coarse_observed_points.saturating_mul(k);
        out.placement.max_points = cfg.placement.max_points.saturating_mul(k);
        out
    }

    /// Trains whole-object models on `instances` with the budget of all their parts.
    pub fn train(instances: &[PartDecomposedObject], cfg: &TrainConfig) -> Result<CategoryModels> {
        let parts = instances.first().map_or(1, |i| i.parts.len());
        let merged: Vec<PartDecomposedObject> = instances.iter().map(Self::object).collect();
        let cfg = TrainConfig {
            max_points: cfg.max_points.saturating_mul(parts),
            ..*cfg
        };
        train_category(&merged, &cfg)
    }
}

/// The whole-object baseline: the same pipeline on trivially decomposed objects.
pub fn whole_object_baseline(
    demo: &Demonstration,
    novel_a: &PartDecomposedObject,
    novel_b: &PartDecomposedObject,
    whole_a: &CategoryModels,
    whole_b: &CategoryModels,
    cfg: &TransferConfig,
) -> Result<TransferResult> {
    let cfg = WholeObject::transfer_config(cfg, demo.object_a.parts.len());
    let analysis = analyze_demo(&WholeObject::demo(demo), whole_a, whole_b, &cfg)?;
    transfer(&analysis, &WholeObject::object(novel_a), &WholeObject::object(novel_b), whole_a, whole_b, &cfg)
}
