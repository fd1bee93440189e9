//! One-sided Chamfer distances, plain and label-restricted.
//!
//! All sums use squared Euclidean distances. The labeled form sums, over the
//! two label values, the mean squared nearest-neighbor distance from the
//! source points carrying that value into the target points carrying the same
//! value.

use super::{NeighborIndex, Point3, PointCloud};
use crate::error::{Error, Result};

/// Mean squared nearest-neighbor distance from each point of `x` into `y`.
pub fn chamfer(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    x.ensure_non_empty()?;
    y.ensure_non_empty()?;
    let index = NeighborIndex::new(&y.points);
    Ok(mean_nn_sq(&index, x.points.iter()))
}

/// `chamfer(x, y) + chamfer(y, x)`.
pub fn symmetric_chamfer(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    Ok(chamfer(x, y)? + chamfer(y, x)?)
}

/// Chamfer distance restricted to points sharing the value of label `key`.
pub fn labeled_chamfer(x: &PointCloud, y: &PointCloud, key: &str) -> Result<f64> {
    x.ensure_non_empty()?;
    y.ensure_non_empty()?;
    let keys = [key.to_string()];
    let target = ChamferTarget::new(y, &keys)?;
    let parts = partition(x, &keys)?;
    target.cost(&x.points, &parts)
}

fn mean_nn_sq<'a>(index: &NeighborIndex, pts: impl Iterator<Item = &'a Point3>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for p in pts {
        sum += index.nearest(p).unwrap().1;
        n += 1;
    }
    sum / n as f64
}

/// Source points split by the value of one label key (or unsplit when `key` is `None`).
#[derive(Debug, Clone)]
pub struct ClassPartition {
    pub key: Option<String>,
    pub classes: [Vec<usize>; 2],
}

/// Splits `cloud` by each key; an empty key list yields one unlabeled partition.
pub fn partition(cloud: &PointCloud, keys: &[String]) -> Result<Vec<ClassPartition>> {
    if keys.is_empty() {
        return Ok(vec![ClassPartition {
            key: None,
            classes: [(0..cloud.len()).collect(), Vec::new()],
        }]);
    }
    keys.iter()
        .map(|key| {
            let column = cloud.label(key)?;
            let mut classes = [Vec::new(), Vec::new()];
            for (i, &v) in column.iter().enumerate() {
                classes[usize::from(v)].push(i);
            }
            Ok(ClassPartition {
                key: Some(key.clone()),
                classes,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
struct SubIndex {
    tree: NeighborIndex,
    map: Vec<usize>,
}

/// A correspondence produced by a labeled nearest-neighbor query.
#[derive(Debug, Clone, Copy)]
pub struct Match {
    pub source: usize,
    pub target: usize,
    /// `1 / |source class|`, so that Σ weight·d² equals the labeled Chamfer sum.
    pub weight: f64,
    pub dist_sq: f64,
}

/// Per-key, per-class neighbor indices over a fixed target cloud.
#[derive(Debug, Clone)]
pub struct ChamferTarget {
    keys: Vec<Option<String>>,
    classes: Vec<[Option<SubIndex>; 2]>,
}

impl ChamferTarget {
    pub fn new(target: &PointCloud, keys: &[String]) -> Result<Self> {
        target.ensure_non_empty()?;
        let parts = partition(target, keys)?;
        let mut out = ChamferTarget {
            keys: Vec::with_capacity(parts.len()),
            classes: Vec::with_capacity(parts.len()),
        };
        for part in parts {
            let build = |idx: &Vec<usize>| {
                (!idx.is_empty()).then(|| SubIndex {
                    tree: NeighborIndex::new(
                        &idx.iter().map(|&i| target.points[i]).collect::<Vec<_>>(),
                    ),
                    map: idx.clone(),
                })
            };
            out.classes.push([build(&part.classes[0]), build(&part.classes[1])]);
            out.keys.push(part.key);
        }
        Ok(out)
    }

    fn check(&self, parts: &[ClassPartition]) -> Result<()> {
        if parts.len() != self.keys.len()
            || parts.iter().zip(&self.keys).any(|(p, k)| &p.key != k)
        {
            return Err(Error::Invalid(
                "source and target label keys differ".into(),
            ));
        }
        Ok(())
    }

    fn unmatched(&self, term: usize, class: usize) -> Error {
        Error::UnmatchedLabelClass {
            key: self.keys[term].clone().unwrap_or_default(),
            value: class as u8,
        }
    }

    /// Σ over keys of the labeled Chamfer distance from `points` (partitioned by `parts`).
    pub fn cost(&self, points: &[Point3], parts: &[ClassPartition]) -> Result<f64> {
        self.check(parts)?;
        let mut total = 0.0;
        for (t, part) in parts.iter().enumerate() {
            for c in 0..2 {
                let src = &part.classes[c];
                if src.is_empty() {
                    continue;
                }
                let sub = self.classes[t][c]
                    .as_ref()
                    .ok_or_else(|| self.unmatched(t, c))?;
                total += mean_nn_sq(&sub.tree, src.iter().map(|&i| &points[i]));
            }
        }
        Ok(total)
    }

    /// Labeled nearest-neighbor correspondences for every source point and key.
    pub fn matches(&self, points: &[Point3], parts: &[ClassPartition]) -> Result<Vec<Match>> {
        self.check(parts)?;
        let mut out = Vec::new();
        for (t, part) in parts.iter().enumerate() {
            for c in 0..2 {
                let src = &part.classes[c];
                if src.is_empty() {
                    continue;
                }
                let sub = self.classes[t][c]
                    .as_ref()
                    .ok_or_else(|| self.unmatched(t, c))?;
                let weight = 1.0 / src.len() as f64;
                for &i in src {
                    let (j, d2) = sub.tree.nearest(&points[i]).unwrap();
                    out.push(Match {
                        source: i,
                        target: sub.map[j],
                        weight,
                        dist_sq: d2,
                    });
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{RigidTransform, Vec3};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_chamfer(x: &[Point3], y: &[Point3]) -> f64 {
        let mut sum = 0.0;
        for p in x {
            let mut best = f64::INFINITY;
            for q in y {
                best = best.min((p - q).norm_squared());
            }
            sum += best;
        }
        sum / x.len() as f64
    }

    fn brute_labeled(x: &PointCloud, y: &PointCloud, key: &str) -> f64 {
        let lx = x.label(key).unwrap();
        let ly = y.label(key).unwrap();
        (0..2)
            .map(|c| {
                let xs: Vec<Point3> = (0..x.len()).filter(|&i| lx[i] == (c == 1)).map(|i| x.points[i]).collect();
                let ys: Vec<Point3> = (0..y.len()).filter(|&i| ly[i] == (c == 1)).map(|i| y.points[i]).collect();
                if xs.is_empty() { 0.0 } else { brute_chamfer(&xs, &ys) }
            })
            .sum()
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
        let pts = (0..n)
            .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let mut c = PointCloud::new(pts);
        let lab = (0..n).map(|_| rng.random_bool(0.4)).collect();
        c.set_label("k", lab).unwrap();
        c
    }

    #[test]
    fn self_distance_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_cloud(&mut rng, 50);
        assert_eq!(chamfer(&x, &x).unwrap(), 0.0);
        assert_eq!(labeled_chamfer(&x, &x, "k").unwrap(), 0.0);
    }

    #[test]
    fn unit_offset() {
        let x = PointCloud::from_slice(&[[0.0, 0.0, 0.0]]);
        let y = PointCloud::from_slice(&[[1.0, 0.0, 0.0]]);
        assert_eq!(chamfer(&x, &y).unwrap(), 1.0);
    }

    #[test]
    fn cross_label_matches_forbidden() {
        let mut x = PointCloud::from_slice(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        x.set_label("k", vec![false, true]).unwrap();
        let mut y = x.clone();
        y.set_label("k", vec![true, false]).unwrap();
        assert_eq!(labeled_chamfer(&x, &y, "k").unwrap(), 2.0);
    }

    #[test]
    fn empty_and_unmatched_errors() {
        let x = PointCloud::from_slice(&[[0.0, 0.0, 0.0]]);
        let empty = PointCloud::new(vec![]);
        assert!(matches!(chamfer(&x, &empty), Err(Error::EmptyCloud)));
        assert!(matches!(chamfer(&empty, &x), Err(Error::EmptyCloud)));
        let mut a = x.clone();
        a.set_label("k", vec![true]).unwrap();
        let mut b = x.clone();
        b.set_label("k", vec![false]).unwrap();
        assert!(matches!(
            labeled_chamfer(&a, &b, "k"),
            Err(Error::UnmatchedLabelClass { value: 1, .. })
        ));
        assert!(matches!(labeled_chamfer(&a, &x, "k"), Err(Error::MissingLabel(_))));
    }

    #[test]
    fn matches_brute_force_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = random_cloud(&mut rng, 100);
            let y = random_cloud(&mut rng, 100);
            let plain = chamfer(&x, &y).unwrap();
            assert!((plain - brute_chamfer(&x.points, &y.points)).abs() < 1e-10);
            let lab = labeled_chamfer(&x, &y, "k").unwrap();
            assert!((lab - brute_labeled(&x, &y, "k")).abs() < 1e-10);
        }
    }

    #[test]
    fn match_weights_reproduce_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_cloud(&mut rng, 80);
        let y = random_cloud(&mut rng, 60);
        let keys = vec!["k".to_string()];
        let target = ChamferTarget::new(&y, &keys).unwrap();
        let parts = partition(&x, &keys).unwrap();
        let cost = target.cost(&x.points, &parts).unwrap();
        let via_matches: f64 = target
            .matches(&x.points, &parts)
            .unwrap()
            .iter()
            .map(|m| m.weight * m.dist_sq)
            .sum();
        assert!((cost - via_matches).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn nonnegative_and_zero_on_subsets(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y = random_cloud(&mut rng, 40);
            let x = y.select(&[3, 7, 11, 20]);
            prop_assert!(chamfer(&x, &y).unwrap().abs() < 1e-12);
            let z = random_cloud(&mut rng, 30);
            prop_assert!(chamfer(&z, &y).unwrap() > 0.0);
        }

        #[test]
        fn constant_label_equals_plain(seed in any::<u64>(), value in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = random_cloud(&mut rng, 50);
            let mut y = random_cloud(&mut rng, 70);
            x.set_label("c", vec![value; 50]).unwrap();
            y.set_label("c", vec![value; 70]).unwrap();
            prop_assert_eq!(labeled_chamfer(&x, &y, "c").unwrap(), chamfer(&x, &y).unwrap());
        }

        #[test]
        fn rigid_invariance(seed in any::<u64>(), yaw in -3.0..3.0f64, pitch in -1.0..1.0f64,
                            t in prop::array::uniform3(-1.0..1.0f64)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_cloud(&mut rng, 60);
            let y = random_cloud(&mut rng, 60);
            prop_assume!(labeled_chamfer(&x, &y, "k").is_ok());
            let tr = RigidTransform::from_euler(yaw, pitch, 0.3, Vec3::from(t));
            let a = labeled_chamfer(&x, &y, "k").unwrap();
            let b = labeled_chamfer(&tr.apply_cloud(&x), &tr.apply_cloud(&y), "k").unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
