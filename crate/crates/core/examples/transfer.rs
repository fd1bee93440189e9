//! One demonstration of hanging a mug on a rack, transferred to a new mug and
//! rack and checked against the analytic scene.
//!
//! `cargo run --release --example transfer [TASK]` with TASK one of
//! mug_on_rack (default), bowl_on_mug, teapot_pour_align.

use partwarp::eval::check_success;
use partwarp::geom::{RigidTransform, Vec3};
use partwarp::synth::{default_pair, generate, generate_demo, goal_pose, Family, Task, PENETRATION_TOLERANCE};
use partwarp::transfer::{analyze_demo, train_category, transfer, TrainConfig, TransferConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> partwarp::Result<()> {
    let task: Task = std::env::args().nth(1).as_deref().unwrap_or("mug_on_rack").parse()?;
    let (ca, cb) = task.categories();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut train = |c| {
        (0..5)
            .map(|_| Ok(generate(&Family::Training.sample(c, &mut rng), 300)?.object))
            .collect::<partwarp::Result<Vec<_>>>()
    };
    let (train_a, train_b) = (train(ca)?, train(cb)?);
    let models_a = train_category(&train_a, &TrainConfig::default())?;
    let models_b = train_category(&train_b, &TrainConfig::default())?;

    let (demo_a, demo_b) = default_pair(task, 100);
    let demo = generate_demo(task, &demo_a, &demo_b, 300)?;
    let cfg = TransferConfig {
        delta_fraction: task.interaction_fraction(),
        ..TransferConfig::default()
    };
    let analysis = analyze_demo(&demo.demo, &models_a, &models_b, &cfg)?;
    for ips in &analysis.interactions {
        println!("interaction {} → {}: {} point pairs", ips.part_m, ips.part_n, ips.pairs.len());
    }
    println!("selected relations {:?} (score {:.4})", analysis.selection.relations, analysis.selection.score);

    // a new pair, A dropped at an arbitrary pose, B at the origin
    let spec_a = Family::Control.sample(ca, &mut rng);
    let spec_b = Family::Control.sample(cb, &mut rng);
    let a = generate(&spec_a, 300)?;
    let b = generate(&spec_b, 300)?;
    let pose = RigidTransform::from_euler(1.2, 0.0, 0.0, Vec3::new(0.2, 0.15, 0.0));
    let result = transfer(&analysis, &a.object.transformed(&pose), &b.object, &models_a, &models_b, &cfg)?;

    let rel = result.t_final.compose(&pose);
    let dense = generate(&spec_a, 1500)?.object.all_points();
    let check = check_success(task, &spec_a, &spec_b, &rel.apply_points(&dense), &b.sdf, &rel, PENETRATION_TOLERANCE);
    println!(
        "placement: success {}, penetration {:.1} mm, task predicate {}",
        check.success,
        1e3 * check.penetration_depth,
        check.task_predicate
    );
    if let Ok(goal) = goal_pose(task, &spec_a, &spec_b) {
        println!(
            "vs analytic goal: {:.1} mm, {:.2}°",
            1e3 * goal.translation_distance(&rel),
            goal.rotation_distance(&rel).to_degrees()
        );
    }
    Ok(())
}
