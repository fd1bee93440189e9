//! Geometric primitives: point clouds, rigid transforms, neighbor search and
//! Chamfer distances.

mod chamfer;
mod cloud;
mod kdtree;
mod transform;

pub use chamfer::{
    chamfer, labeled_chamfer, partition, symmetric_chamfer, ChamferTarget, ClassPartition, Match,
};
pub use cloud::{adjacency_key, bounds_of, joint_extent, LabelSet, PointCloud, Z_KEY};
pub use kdtree::NeighborIndex;
pub use transform::{project_to_so3, rotation_angle, RigidTransform};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

/// `k` nearest neighbors of `p` as `(index, distance)`, ties by lowest index.
pub fn knn(index: &NeighborIndex, p: &Point3, k: usize) -> Vec<(usize, f64)> {
    index.knn(p, k)
}
