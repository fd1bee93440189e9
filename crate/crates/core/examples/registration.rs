//! Rigid and non-rigid registration of two mugs.
//!
//! `cargo run --release --example registration`

use partwarp::geom::{chamfer, PointCloud, RigidTransform, Vec3};
use partwarp::registration::{cpd_nonrigid, icp, kabsch, CpdConfig, IcpConfig};
use partwarp::synth::{generate, Category, Family};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> partwarp::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mug = |rng: &mut ChaCha8Rng| -> partwarp::Result<PointCloud> {
        let obj = generate(&Family::Training.sample(Category::Mug, rng), 150)?.object;
        Ok(PointCloud::concat(obj.parts.values()))
    };
    let a = mug(&mut rng)?;
    let b = mug(&mut rng)?;

    // Known correspondences: Kabsch is exact.
    let truth = RigidTransform::from_euler(0.8, 0.1, -0.05, Vec3::new(0.2, -0.1, 0.05));
    let pairs: Vec<_> = a.points.iter().map(|p| (*p, truth.apply(p))).collect();
    let k = kabsch(&pairs, None)?;
    println!("kabsch: rotation error {:.1e} rad", k.rotation_distance(&truth));

    // Unknown correspondences from a rough guess: ICP.
    let moved = truth.apply_cloud(&a);
    let guess = RigidTransform::from_euler(0.5, 0.0, 0.0, Vec3::new(0.15, -0.05, 0.0));
    let r = icp(&a, &moved, &guess, &IcpConfig::default())?;
    println!(
        "icp: {} iterations, residual {:.2e}, rotation error {:.1e} rad",
        r.history.len() - 1,
        r.residual,
        r.transform.rotation_distance(&truth)
    );

    // A different mug: CPD warps a onto b.
    let c = cpd_nonrigid(&a, &b, &CpdConfig::default())?;
    let warped = c.field.apply(&a)?;
    println!(
        "cpd: {} EM iterations (converged: {}), chamfer a→b {:.2e} before, {:.2e} after",
        c.iterations,
        c.converged,
        chamfer(&a, &b)?,
        chamfer(&warped, &b)?
    );
    Ok(())
}
