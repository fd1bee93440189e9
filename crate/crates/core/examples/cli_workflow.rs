//! The command-line workflow driven from code: generate a dataset, train,
//! transfer one pair and run a short evaluation, all in a temporary directory.
//!
//! `cargo run --release --example cli_workflow`

use partwarp::cli::{cmd_eval, cmd_gen, cmd_train, cmd_transfer, RunConfig, DEMO};
use partwarp::synth::Task;

fn main() -> partwarp::Result<()> {
    let dir = tempfile::tempdir()?;
    let mut cfg = RunConfig::default()
        .with_overrides(&["eval.trials=3", "gen.points_per_part=200", "seed=5"])?;
    cfg.dataset_dir = dir.path().join("data");
    cfg.model_dir = dir.path().join("models");
    cfg.output_dir = dir.path().join("out");

    let manifest = cmd_gen(&cfg, Task::BowlOnMug, 8)?;
    println!("gen: {} training and {} test pairs", manifest.train.len(), manifest.test.len());

    for entry in cmd_train(&cfg)? {
        println!("train: {} {}/{} from {} instances", entry.kind, entry.category, entry.part, entry.instances);
    }

    let pair = &manifest.test[0];
    let data = &cfg.dataset_dir;
    let result = cmd_transfer(&cfg, &data.join(DEMO), &data.join(&pair.object_a), &data.join(&pair.object_b), None)?;
    println!("transfer {}: relations {:?}", pair.id, result.relations.relations);

    let report = cmd_eval(&cfg)?;
    for s in &report.summaries {
        println!("eval {}: {}/{}", s.method, s.successes, s.trials);
    }
    println!("reports written to {}", cfg.output_dir.display());
    Ok(())
}
