//! Paired comparison of part-wise warping (PSW) with whole-object warping (IW)
//! on mug-on-rack, over a test family whose rack pegs vary in height.
//!
//! `cargo run --release --example experiment [TRIALS] [FAMILY]`

use partwarp::eval::{run_experiment, ExperimentConfig, ModelBundle, PreparedDemo, TestSet};
use partwarp::synth::{default_pair, generate, generate_demo, Family, Task};
use partwarp::transfer::{train_category, TrainConfig, WholeObject};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> partwarp::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut args = std::env::args().skip(1);
    let trials: usize = args.next().map(|s| s.parse().expect("TRIALS is a number")).unwrap_or(10);
    let family: Family = args.next().as_deref().unwrap_or("raised_peg").parse()?;
    let task = Task::MugOnRack;
    let (ca, cb) = task.categories();

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut train = |c| {
        (0..5)
            .map(|_| Ok(generate(&Family::Training.sample(c, &mut rng), 300)?.object))
            .collect::<partwarp::Result<Vec<_>>>()
    };
    let (train_a, train_b) = (train(ca)?, train(cb)?);
    let tc = TrainConfig::default();
    let models = ModelBundle {
        parts_a: train_category(&train_a, &tc)?,
        parts_b: train_category(&train_b, &tc)?,
        whole_a: WholeObject::train(&train_a, &tc)?,
        whole_b: WholeObject::train(&train_b, &tc)?,
    };
    let (sa, sb) = default_pair(task, 100);
    let demo = generate_demo(task, &sa, &sb, 300)?;

    let mut cfg = ExperimentConfig::new(task);
    cfg.trials = trials;
    let prepared = PreparedDemo::new(&demo, &models, &cfg.transfer)?;
    let tests = TestSet::sample(task, family, 50, 1)?;
    let report = run_experiment(&cfg, &prepared, &tests)?;
    for s in &report.summaries {
        println!(
            "{}: {}/{} ({:.0}% ± {:.0}), {} errors",
            s.method,
            s.successes,
            s.trials,
            100.0 * s.success_rate.unwrap_or(0.0),
            100.0 * s.standard_error.unwrap_or(0.0),
            s.failures
        );
    }
    Ok(())
}
