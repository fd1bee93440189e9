//! Fits a cup model to a posed mug, with and without relational labels.
//!
//! The cup alone is rotationally symmetric, so its yaw is only pinned down by
//! the points labeled as lying next to the handle.
//!
//! `cargo run --release --example inference`

use partwarp::geom::{adjacency_key, Point3, PointCloud, RigidTransform, Vec3};
use partwarp::shapemodel::{infer, InferenceConfig};
use partwarp::synth::{generate, Category, Family};
use partwarp::transfer::{train_category, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn azimuth(from: &Point3, to: &Point3) -> f64 {
    (to.y - from.y).atan2(to.x - from.x).to_degrees()
}

fn main() -> partwarp::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mugs = (0..5)
        .map(|_| Ok(generate(&Family::Training.sample(Category::Mug, &mut rng), 300)?.object))
        .collect::<partwarp::Result<Vec<_>>>()?;
    let models = train_category(&mugs, &TrainConfig::default())?;
    let cup_model = models.model("cup")?;
    let key = adjacency_key("handle");
    let near_handle = cup_model.canonical.label(&key)?;

    let novel = generate(&Family::Control.sample(Category::Mug, &mut rng), 300)?.object;
    let pose = RigidTransform::from_euler(2.0, 0.0, 0.0, Vec3::new(0.3, -0.1, 0.0));
    let observed = models.label(&novel.transformed(&pose))?;
    let truth = azimuth(&observed.part("cup")?.centroid(), &observed.part("handle")?.centroid());
    println!("true handle azimuth {truth:.1}°");

    for keys in [vec![key.clone()], vec![]] {
        let fit = infer(cup_model, observed.part("cup")?, &keys, &InferenceConfig::default())?;
        let rec = fit.posed_reconstruction(cup_model)?;
        let handle_side: Vec<Point3> = rec.points.iter().zip(near_handle).filter(|(_, &f)| f).map(|(p, _)| *p).collect();
        println!(
            "keys {keys:?}: objective {:.4}, converged {}, predicted handle azimuth {:.1}°",
            fit.objective,
            fit.converged,
            azimuth(&rec.centroid(), &PointCloud::new(handle_side).centroid())
        );
    }
    Ok(())
}
