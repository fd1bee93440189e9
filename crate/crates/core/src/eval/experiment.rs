use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::success::{check_success, keypoint_transfer_error, transfer_keypoints};
use crate::error::{Error, Result};
use crate::geom::{Point3, RigidTransform, Vec3};
use crate::synth::{
    generate, goal_pose, jitter, Family, GeneratedDemo, GeneratedObject, ParametricObjectSpec, Task, CHECK_POINTS_PER_PART,
    PENETRATION_TOLERANCE,
};
use crate::transfer::{analyze_demo, close_pairs, transfer, CategoryModels, DemoAnalysis, Relation, TransferConfig, TransferResult, WholeObject};

/// Which transfer method produced a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Part-wise shape warping.
    #[serde(rename = "PSW")]
    Psw,
    /// Whole-object warping baseline.
    #[serde(rename = "IW")]
    Iw,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Psw, Method::Iw];

    pub fn name(self) -> &'static str {
        match self {
            Method::Psw => "PSW",
            Method::Iw => "IW",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Invalid(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub task: Task,
    pub trials: usize,
    /// Points sampled per part for the observed clouds.
    pub points_per_part: usize,
    /// Side of the square in which initial xy positions of object A are drawn.
    pub pose_box: f64,
    /// Std-dev of isotropic Gaussian noise added to observed clouds.
    pub noise_sigma: f64,
    pub tolerance: f64,
    /// Dense samples per part used for the penetration check.
    pub check_points_per_part: usize,
    pub transfer: TransferConfig,
    pub seed: u64,
    /// Worker threads. Results do not depend on it, so reports leave it out.
    #[serde(skip)]
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::new(Task::MugOnRack)
    }
}

impl ExperimentConfig {
    pub fn new(task: Task) -> Self {
        Self {
            task,
            trials: 50,
            points_per_part: 300,
            pose_box: 0.5,
            noise_sigma: 0.0,
            tolerance: PENETRATION_TOLERANCE,
            check_points_per_part: CHECK_POINTS_PER_PART,
            transfer: TransferConfig {
                delta_fraction: task.interaction_fraction(),
                ..TransferConfig::default()
            },
            seed: 0,
            jobs: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_part == 0 || self.check_points_per_part == 0 {
            return Err(Error::Invalid("point counts must be ≥ 1".into()));
        }
        if !(self.pose_box >= 0.0) || !(self.noise_sigma >= 0.0) || !(self.tolerance >= 0.0) {
            return Err(Error::Invalid("pose_box, noise_sigma and tolerance must be ≥ 0".into()));
        }
        self.transfer.inference.validate()
    }
}

/// A fixed set of feasible `(spec_a, spec_b)` pairs trials draw from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSet {
    pub task: Task,
    pub pairs: Vec<(ParametricObjectSpec, ParametricObjectSpec)>,
}

impl TestSet {
    /// Draws `count` pairs from `family`, skipping pairs without a valid goal.
    pub fn sample(task: Task, family: Family, count: usize, seed: u64) -> Result<TestSet> {
        let (ca, cb) = task.categories();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs = Vec::with_capacity(count);
        let mut rejected = 0usize;
        while pairs.len() < count {
            let a = family.sample(ca, &mut rng);
            let b = family.sample(cb, &mut rng);
            if goal_pose(task, &a, &b).is_ok() {
                pairs.push((a, b));
            } else {
                rejected += 1;
                if rejected > 100 * (count + 1) {
                    return Err(Error::InfeasiblePair(format!("family {family} rarely yields feasible {task} pairs")));
                }
            }
        }
        Ok(TestSet { task, pairs })
    }
}

/// One placement attempt by one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub task: Task,
    pub method: Method,
    pub spec_a: ParametricObjectSpec,
    pub spec_b: ParametricObjectSpec,
    /// Pose of A's own frame in the trial scene.
    pub initial_pose: RigidTransform,
    /// Predicted world motion of A; absent when the method failed.
    pub t_predicted: Option<RigidTransform>,
    pub relations: Vec<Relation>,
    pub success: bool,
    pub penetration_depth: Option<f64>,
    pub task_predicate: bool,
    /// Normalized error of the transferred interaction points on A (PSW only).
    pub keypoint_error: Option<f64>,
    /// Distance of the predicted placement from the analytic goal.
    pub goal_translation_error: Option<f64>,
    pub goal_rotation_error: Option<f64>,
    pub error: Option<String>,
    /// Seconds spent in the method; kept out of serialized reports so they stay reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub trials: usize,
    pub successes: usize,
    /// `None` when there were no trials.
    pub success_rate: Option<f64>,
    pub standard_error: Option<f64>,
    /// Trials where the method raised an error.
    pub failures: usize,
}

impl MethodSummary {
    pub fn from_records(method: Method, records: &[TrialRecord]) -> MethodSummary {
        let mine: Vec<&TrialRecord> = records.iter().filter(|r| r.method == method).collect();
        let n = mine.len();
        let successes = mine.iter().filter(|r| r.success).count();
        let (success_rate, standard_error) = if n == 0 {
            (None, None)
        } else {
            let p = successes as f64 / n as f64;
            (Some(p), Some((p * (1.0 - p) / n as f64).sqrt()))
        };
        MethodSummary {
            method,
            trials: n,
            successes,
            success_rate,
            standard_error,
            failures: mine.iter().filter(|r| r.error.is_some()).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub summaries: Vec<MethodSummary>,
    pub trials: Vec<TrialRecord>,
}

impl ExperimentReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// Writes `report.json`, `trials.csv` and `timings.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)?)?;
        self.write_csv(&dir.join("trials.csv"))?;
        let mut w = csv::Writer::from_path(dir.join("timings.csv"))?;
        w.write_record(["trial", "method", "wall_time"])?;
        for r in &self.trials {
            w.write_record([r.trial.to_string(), r.method.to_string(), format!("{:.3}", r.wall_time)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One flat row per trial record.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "trial",
            "seed",
            "task",
            "method",
            "success",
            "penetration_depth",
            "task_predicate",
            "keypoint_error",
            "goal_translation_error",
            "goal_rotation_error",
            "relations",
            "spec_a",
            "spec_b",
            "error",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
        for r in &self.trials {
            let relations: Vec<String> = r.relations.iter().map(|(m, n)| format!("{m}-{n}")).collect();
            w.write_record([
                r.trial.to_string(),
                r.seed.to_string(),
                r.task.to_string(),
                r.method.to_string(),
                r.success.to_string(),
                opt(r.penetration_depth),
                r.task_predicate.to_string(),
                opt(r.keypoint_error),
                opt(r.goal_translation_error),
                opt(r.goal_rotation_error),
                relations.join(";"),
                serde_json::to_string(&r.spec_a.parameters)?,
                serde_json::to_string(&r.spec_b.parameters)?,
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Models of both categories, whole-object and part-wise.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub parts_a: CategoryModels,
    pub parts_b: CategoryModels,
    pub whole_a: CategoryModels,
    pub whole_b: CategoryModels,
}

/// The demonstration analyzed once per method.
pub struct PreparedDemo<'a> {
    pub demo: &'a GeneratedDemo,
    pub models: &'a ModelBundle,
    pub psw: DemoAnalysis,
    pub iw: DemoAnalysis,
    /// Transfer settings of the baseline, with its budgets scaled to the merged object.
    pub iw_config: TransferConfig,
}

impl<'a> PreparedDemo<'a> {
    pub fn new(demo: &'a GeneratedDemo, models: &'a ModelBundle, cfg: &TransferConfig) -> Result<Self> {
        let psw = analyze_demo(&demo.demo, &models.parts_a, &models.parts_b, cfg).map_err(|e| e.context("PSW demo analysis"))?;
        let iw_config = WholeObject::transfer_config(cfg, demo.demo.object_a.parts.len());
        let iw = analyze_demo(&WholeObject::demo(&demo.demo), &models.whole_a, &models.whole_b, &iw_config)
            .map_err(|e| e.context("IW demo analysis"))?;
        info!(
            "demo relations: PSW {:?} (score {:.4}), IW {:?}",
            psw.selection.relations, psw.selection.score, iw.selection.relations
        );
        Ok(PreparedDemo {
            demo,
            models,
            psw,
            iw,
            iw_config,
        })
    }
}

/// Seed of trial `i`, derived from the master seed by index.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial as u64 + 1);
    rng.random()
}

/// Runs paired PSW / IW trials on pairs drawn from `tests`.
///
/// Failures of a method inside a trial are recorded on that trial; only
/// invalid configuration or an unusable demonstration abort the run.
pub fn run_experiment(cfg: &ExperimentConfig, prepared: &PreparedDemo<'_>, tests: &TestSet) -> Result<ExperimentReport> {
    cfg.validate()?;
    if tests.task != cfg.task || prepared.demo.task != cfg.task {
        return Err(Error::Invalid(format!(
            "task mismatch: config {}, test set {}, demo {}",
            cfg.task, tests.task, prepared.demo.task
        )));
    }
    if cfg.trials > 0 && tests.pairs.is_empty() {
        return Err(Error::Invalid("empty test set".into()));
    }
    let mut order: Vec<usize> = (0..tests.pairs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));

    let jobs = cfg.jobs.max(1).min(cfg.trials.max(1));
    let mut per_trial: Vec<Vec<TrialRecord>> = vec![Vec::new(); cfg.trials];
    if jobs == 1 {
        for (i, slot) in per_trial.iter_mut().enumerate() {
            *slot = run_trial(cfg, prepared, tests, &order, i);
        }
    } else {
        let chunk = cfg.trials.div_ceil(jobs);
        std::thread::scope(|scope| {
            for (c, slots) in per_trial.chunks_mut(chunk).enumerate() {
                let order = &order;
                scope.spawn(move || {
                    for (k, slot) in slots.iter_mut().enumerate() {
                        *slot = run_trial(cfg, prepared, tests, order, c * chunk + k);
                    }
                });
            }
        });
    }
    let trials: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();
    let summaries = Method::ALL.iter().map(|&m| MethodSummary::from_records(m, &trials)).collect();
    Ok(ExperimentReport {
        config: cfg.clone(),
        summaries,
        trials,
    })
}

struct TrialScene {
    a: GeneratedObject,
    b: GeneratedObject,
    dense_a: Vec<Point3>,
    pose: RigidTransform,
    truth: Option<RigidTransform>,
}

fn run_trial(cfg: &ExperimentConfig, prepared: &PreparedDemo<'_>, tests: &TestSet, order: &[usize], i: usize) -> Vec<TrialRecord> {
    let seed = trial_seed(cfg.seed, i);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (spec_a, spec_b) = tests.pairs[order[i % order.len()]].clone();
    let yaw = rng.random_range(0.0..std::f64::consts::TAU);
    let h = 0.5 * cfg.pose_box;
    let (x, y) = if h > 0.0 { (rng.random_range(-h..=h), rng.random_range(-h..=h)) } else { (0.0, 0.0) };
    let pose = RigidTransform::from_euler(yaw, 0.0, 0.0, Vec3::new(x, y, 0.0));
    let noise_seed: u64 = rng.random();
    let inference_seed: u64 = rng.random();
    let blank = |method: Method| TrialRecord {
        trial: i,
        seed,
        task: cfg.task,
        method,
        spec_a: spec_a.clone(),
        spec_b: spec_b.clone(),
        initial_pose: pose,
        t_predicted: None,
        relations: Vec::new(),
        success: false,
        penetration_depth: None,
        task_predicate: false,
        keypoint_error: None,
        goal_translation_error: None,
        goal_rotation_error: None,
        error: None,
        wall_time: 0.0,
    };

    let scene = (|| -> Result<TrialScene> {
        let mut a = generate(&spec_a, cfg.points_per_part)?;
        let mut b = generate(&spec_b, cfg.points_per_part)?;
        if cfg.noise_sigma > 0.0 {
            a.object = jitter(&a.object, cfg.noise_sigma, noise_seed)?;
            b.object = jitter(&b.object, cfg.noise_sigma, noise_seed ^ 1)?;
        }
        let dense_a = generate(&spec_a, cfg.check_points_per_part)?.object.all_points();
        let truth = goal_pose(cfg.task, &spec_a, &spec_b).ok();
        Ok(TrialScene { a, b, dense_a, pose, truth })
    })();
    let scene = match scene {
        Ok(s) => s,
        Err(e) => {
            warn!("trial {i}: scene generation failed: {e}");
            return Method::ALL
                .iter()
                .map(|&m| TrialRecord {
                    error: Some(format!("scene generation: {e}")),
                    ..blank(m)
                })
                .collect();
        }
    };
    let novel_a = scene.a.object.transformed(&pose);
    let mut psw_cfg = cfg.transfer;
    psw_cfg.inference.seed = inference_seed;
    let mut iw_cfg = prepared.iw_config;
    iw_cfg.inference.seed = inference_seed;

    Method::ALL
        .iter()
        .map(|&method| {
            let mut rec = blank(method);
            let start = Instant::now();
            let result = match method {
                Method::Psw => transfer(&prepared.psw, &novel_a, &scene.b.object, &prepared.models.parts_a, &prepared.models.parts_b, &psw_cfg),
                Method::Iw => transfer(
                    &prepared.iw,
                    &WholeObject::object(&novel_a),
                    &WholeObject::object(&scene.b.object),
                    &prepared.models.whole_a,
                    &prepared.models.whole_b,
                    &iw_cfg,
                ),
            };
            rec.wall_time = start.elapsed().as_secs_f64();
            match result {
                Ok(res) => score_trial(cfg, prepared, &scene, &res, method, &mut rec),
                Err(e) => {
                    warn!("trial {i} {method}: {e}");
                    rec.error = Some(e.to_string());
                }
            }
            info!(
                "trial {i} {method}: success {} penetration {:?} predicate {}",
                rec.success, rec.penetration_depth, rec.task_predicate
            );
            rec
        })
        .collect()
}

fn score_trial(
    cfg: &ExperimentConfig,
    prepared: &PreparedDemo<'_>,
    scene: &TrialScene,
    res: &TransferResult,
    method: Method,
    rec: &mut TrialRecord,
) {
    // A's own frame → B's frame (B sits at the origin).
    let rel = res.t_final.compose(&scene.pose);
    let placed = rel.apply_points(&scene.dense_a);
    let check = check_success(cfg.task, &rec.spec_a, &rec.spec_b, &placed, &scene.b.sdf, &rel, cfg.tolerance);
    rec.t_predicted = Some(res.t_final);
    rec.relations = res.relations.relations.clone();
    rec.success = check.success;
    rec.penetration_depth = Some(check.penetration_depth);
    rec.task_predicate = check.task_predicate;
    if let Some(truth) = scene.truth {
        rec.goal_translation_error = Some(truth.translation_distance(&rel));
        rec.goal_rotation_error = Some(truth.rotation_distance(&rel));
    }
    if method == Method::Psw {
        match interaction_keypoint_error(cfg, prepared, scene, res) {
            Ok(e) => rec.keypoint_error = Some(e),
            Err(e) => warn!("trial {}: keypoint error unavailable: {e}", rec.trial),
        }
    }
}

/// Error of the transferred interaction points of the selected relations on
/// A, before placement, against the same surface locations on the novel object.
fn interaction_keypoint_error(cfg: &ExperimentConfig, prepared: &PreparedDemo<'_>, scene: &TrialScene, res: &TransferResult) -> Result<f64> {
    let demo = prepared.demo;
    let goal = demo.demo.goal_a();
    let mut transferred = Vec::new();
    let mut truth = Vec::new();
    for (m, n) in &prepared.psw.selection.relations {
        let pairs = close_pairs(
            &goal.part(m)?.points,
            &demo.demo.object_b.part(n)?.points,
            prepared.psw.delta,
            cfg.transfer.k_max,
        );
        let initial = demo.demo.object_a.part(m)?;
        let pts: Vec<Point3> = pairs.iter().map(|p| initial.points[p.0]).collect();
        let model = prepared.models.parts_a.model(m)?;
        let source = prepared.psw.fits_a.get(m).ok_or_else(|| Error::MissingFit(m.clone()))?;
        let target = res.fits_a.get(m).ok_or_else(|| Error::MissingFit(m.clone()))?;
        transferred.extend(transfer_keypoints(model, source, target, &pts)?);
        let coords = &demo.a.correspondences[m];
        for p in &pairs {
            truth.push(scene.pose.apply(&scene.a.point_at(m, &coords[p.0])?));
        }
    }
    keypoint_transfer_error(&transferred, &truth, scene.a.object.extent())
}
