use std::path::{Path, PathBuf};

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::dataset::{read_json, write_json, DemoEntry, Manifest, PairEntry, PairSpec, DEMO};
use crate::error::{Error, Result};
use crate::eval::{run_experiment, ExperimentConfig, ExperimentReport, ModelBundle, PreparedDemo};
use crate::synth::{default_pair, generate, generate_demo, Family, Task};
use crate::transfer::{analyze_demo, train_category, transfer, CategoryModels, Demonstration, PartDecomposedObject, TransferResult, WholeObject};

const PARTS_DIR: &str = "parts";
const WHOLE_DIR: &str = "whole";
const TRAIN_LOG: &str = "train_log.json";

/// Generates `count` object pairs for `task` (the first `gen.train_count`
/// from the training family, the rest from `gen.test_family`) plus the demonstration.
pub fn cmd_gen(cfg: &RunConfig, task: Task, count: usize) -> Result<Manifest> {
    let n_train = cfg.gen.train_count;
    if count <= n_train {
        return Err(Error::Invalid(format!(
            "count {count} leaves no test pairs after {n_train} training pairs"
        )));
    }
    let dir = &cfg.dataset_dir;
    let ppp = cfg.gen.points_per_part;
    let (ca, cb) = task.categories();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let train: Vec<PairSpec> = (0..n_train)
        .map(|_| PairSpec {
            a: Family::Training.sample(ca, &mut rng),
            b: Family::Training.sample(cb, &mut rng),
        })
        .collect();
    let tests = crate::eval::TestSet::sample(task, cfg.gen.test_family, count - n_train, cfg.seed.wrapping_add(1))?;
    let test: Vec<PairSpec> = tests.pairs.into_iter().map(|(a, b)| PairSpec { a, b }).collect();

    let write_pairs = |prefix: &str, pairs: &[PairSpec]| -> Result<Vec<PairEntry>> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let id = format!("{prefix}_{i:03}");
                let base = PathBuf::from("pairs").join(&id);
                let entry = PairEntry {
                    spec: base.join("spec.json"),
                    object_a: base.join("a.json"),
                    object_b: base.join("b.json"),
                    id,
                };
                write_json(&dir.join(&entry.spec), p)?;
                write_json(&dir.join(&entry.object_a), &generate(&p.a, ppp)?.object)?;
                write_json(&dir.join(&entry.object_b), &generate(&p.b, ppp)?.object)?;
                Ok(entry)
            })
            .collect()
    };
    let train = write_pairs("train", &train)?;
    let test = write_pairs("test", &test)?;

    let (spec_a, spec_b) = default_pair(task, cfg.seed);
    let demo = generate_demo(task, &spec_a, &spec_b, ppp)?;
    write_json(&dir.join(DEMO), &demo.demo)?;

    let manifest = Manifest {
        task,
        seed: cfg.seed,
        points_per_part: ppp,
        test_family: cfg.gen.test_family,
        demo: DemoEntry {
            file: PathBuf::from(DEMO),
            spec_a,
            spec_b,
        },
        train,
        test,
    };
    manifest.save(dir)?;
    info!("wrote {} pairs and a demonstration to {}", count, dir.display());
    Ok(manifest)
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub kind: String,
    pub category: String,
    pub part: String,
    pub instances: usize,
    pub variance_ratios: Vec<f64>,
}

/// Trains part-wise and whole-object models of both categories of the dataset's task.
pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<TrainLogEntry>> {
    let data = &cfg.dataset_dir;
    let manifest = Manifest::load(data)?;
    let (objs_a, objs_b) = manifest.training_objects(data)?;
    let mut log = Vec::new();
    for objs in [&objs_a, &objs_b] {
        let category = objs.first().map(|o| o.category.clone()).unwrap_or_default();
        for (kind, models) in [
            (PARTS_DIR, train_category(objs, &cfg.train)),
            (WHOLE_DIR, WholeObject::train(objs, &cfg.train)),
        ] {
            let models = models.map_err(|e| e.context(format!("training {kind} models of `{category}`")))?;
            models.save(&cfg.model_dir.join(kind).join(&models.category))?;
            for (part, m) in &models.models {
                info!("{kind}/{category}/{part}: variance ratios {:?}", m.variance_ratios);
                log.push(TrainLogEntry {
                    kind: kind.to_string(),
                    category: models.category.clone(),
                    part: part.clone(),
                    instances: objs.len(),
                    variance_ratios: m.variance_ratios.clone(),
                });
            }
        }
    }
    write_json(&cfg.model_dir.join(TRAIN_LOG), &log)?;
    Ok(log)
}

fn load_models(cfg: &RunConfig, kind: &str, category: &str) -> Result<CategoryModels> {
    CategoryModels::load(&cfg.model_dir.join(kind).join(category))
        .map_err(|e| e.context(format!("{kind} models of `{category}`")))
}

/// The task whose object categories match the demonstration.
fn task_of(demo: &Demonstration) -> Result<Task> {
    Task::ALL
        .into_iter()
        .find(|t| {
            let (a, b) = t.categories();
            a.name() == demo.object_a.category && b.name() == demo.object_b.category
        })
        .ok_or_else(|| {
            Error::Invalid(format!(
                "no task places a `{}` relative to a `{}`",
                demo.object_a.category, demo.object_b.category
            ))
        })
}

/// Transfers the demonstrated placement to a novel pair and writes `transfer.json`
/// into the output directory (or `out` when given).
pub fn cmd_transfer(
    cfg: &RunConfig,
    demo: &Path,
    novel_a: &Path,
    novel_b: &Path,
    out: Option<&Path>,
) -> Result<TransferResult> {
    let demo = Demonstration::load(demo)?;
    let novel_a = PartDecomposedObject::load(novel_a)?;
    let novel_b = PartDecomposedObject::load(novel_b)?;
    let models_a = load_models(cfg, PARTS_DIR, &demo.object_a.category)?;
    let models_b = load_models(cfg, PARTS_DIR, &demo.object_b.category)?;
    let tcfg = cfg.transfer_config(task_of(&demo)?);
    let analysis = analyze_demo(&demo, &models_a, &models_b, &tcfg).map_err(|e| e.context("transfer: demonstration"))?;
    let result = transfer(&analysis, &novel_a, &novel_b, &models_a, &models_b, &tcfg).map_err(|e| e.context("transfer: novel scene"))?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.join("transfer.json"));
    write_json(&path, &result)?;
    Ok(result)
}

/// Runs the paired PSW / IW experiment on the dataset's test split and writes the report.
pub fn cmd_eval(cfg: &RunConfig) -> Result<ExperimentReport> {
    let data = &cfg.dataset_dir;
    let manifest = Manifest::load(data)?;
    let task = manifest.task;
    let (ca, cb) = task.categories();
    let models = ModelBundle {
        parts_a: load_models(cfg, PARTS_DIR, ca.name())?,
        parts_b: load_models(cfg, PARTS_DIR, cb.name())?,
        whole_a: load_models(cfg, WHOLE_DIR, ca.name())?,
        whole_b: load_models(cfg, WHOLE_DIR, cb.name())?,
    };
    let demo = generate_demo(task, &manifest.demo.spec_a, &manifest.demo.spec_b, manifest.points_per_part)?;
    let stored: Demonstration = read_json(&data.join(&manifest.demo.file))?;
    if stored != demo.demo {
        return Err(Error::Invalid(format!(
            "{} does not match the demonstration its specs generate",
            manifest.demo.file.display()
        )));
    }
    let tests = manifest.test_set(data)?;
    let ecfg = ExperimentConfig {
        task,
        trials: cfg.eval.trials,
        points_per_part: manifest.points_per_part,
        pose_box: cfg.eval.pose_box,
        noise_sigma: cfg.eval.noise_sigma,
        tolerance: cfg.eval.tolerance,
        check_points_per_part: cfg.eval.check_points_per_part,
        transfer: cfg.transfer_config(task),
        seed: cfg.seed,
        jobs: cfg.jobs,
    };
    let prepared = PreparedDemo::new(&demo, &models, &ecfg.transfer)?;
    let report = run_experiment(&ecfg, &prepared, &tests)?;
    report.save(&cfg.output_dir)?;
    for s in &report.summaries {
        info!("{}: {}/{} successes", s.method, s.successes, s.trials);
    }
    Ok(report)
}
