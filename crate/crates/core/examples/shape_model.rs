//! Trains part-wise shape models for mugs and walks their latent space.
//!
//! `cargo run --release --example shape_model [OUT_DIR]` also saves and reloads them.

use partwarp::shapemodel::LatentVector;
use partwarp::synth::{generate, Category, Family};
use partwarp::transfer::{train_category, CategoryModels, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> partwarp::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mugs = (0..5)
        .map(|_| Ok(generate(&Family::Training.sample(Category::Mug, &mut rng), 300)?.object))
        .collect::<partwarp::Result<Vec<_>>>()?;
    let models = train_category(&mugs, &TrainConfig::default())?;
    println!("adjacency: {:?}", models.adjacency);

    for (part, m) in &models.models {
        println!(
            "{part}: {} canonical points (instance {}), latent dim {}, variance ratios {:.3?}",
            m.num_points(),
            m.canonical_instance,
            m.dim(),
            m.variance_ratios
        );
        // one whitened unit along each principal direction
        let canon = m.reconstruct(&LatentVector::zeros(m.dim()))?;
        for c in 0..m.dim() {
            let mut v = LatentVector::zeros(m.dim());
            v.0[c] = 1.0;
            let warped = m.reconstruct(&v)?;
            let shift = warped.points.iter().zip(&canon.points).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            println!("  component {c}: max point shift {:.1} mm", 1e3 * shift);
        }
    }

    if let Some(dir) = std::env::args().nth(1) {
        let dir = std::path::Path::new(&dir);
        models.save(dir)?;
        assert_eq!(CategoryModels::load(dir)?, models);
        println!("saved to and reloaded from {}", dir.display());
    }
    Ok(())
}
