use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{joint_extent, Point3, PointCloud, RigidTransform};

/// An object as a fixed set of named part clouds in the world frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartDecomposedObject {
    pub category: String,
    pub parts: BTreeMap<String, PointCloud>,
}

impl PartDecomposedObject {
    pub fn new(category: impl Into<String>, parts: BTreeMap<String, PointCloud>) -> Result<Self> {
        let obj = PartDecomposedObject {
            category: category.into(),
            parts,
        };
        obj.validate()?;
        Ok(obj)
    }

    pub fn validate(&self) -> Result<()> {
        if self.parts.is_empty() {
            return Err(Error::Invalid(format!("object `{}` has no parts", self.category)));
        }
        for (name, cloud) in &self.parts {
            cloud.ensure_non_empty().map_err(|e| e.context(format!("part `{name}`")))?;
            cloud.validate().map_err(|e| e.context(format!("part `{name}`")))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
        let obj: PartDecomposedObject =
            serde_json::from_str(&text).map_err(|e| Error::from(e).context(path.display().to_string()))?;
        obj.validate().map_err(|e| e.context(path.display().to_string()))?;
        Ok(obj)
    }

    pub fn part(&self, name: &str) -> Result<&PointCloud> {
        self.parts
            .get(name)
            .ok_or_else(|| Error::Invalid(format!("object `{}` has no part `{name}`", self.category)))
    }

    pub fn part_names(&self) -> Vec<String> {
        self.parts.keys().cloned().collect()
    }

    pub fn num_points(&self) -> usize {
        self.parts.values().map(PointCloud::len).sum()
    }

    pub fn transformed(&self, t: &RigidTransform) -> PartDecomposedObject {
        PartDecomposedObject {
            category: self.category.clone(),
            parts: self.parts.iter().map(|(k, c)| (k.clone(), t.apply_cloud(c))).collect(),
        }
    }

    pub fn all_points(&self) -> Vec<Point3> {
        self.parts.values().flat_map(|c| c.points.iter().copied()).collect()
    }

    /// Bounding-box diagonal over all parts.
    pub fn extent(&self) -> f64 {
        joint_extent(self.parts.values().map(|c| c.points.as_slice()))
    }

    /// Unlabeled union of all part clouds, in part-name order.
    pub fn merged(&self) -> PointCloud {
        PointCloud::new(self.all_points())
    }

    pub fn centroid(&self) -> Point3 {
        self.merged().centroid()
    }
}

/// One demonstration: the initial scene and the transform that moves object A to its goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub object_a: PartDecomposedObject,
    pub object_b: PartDecomposedObject,
    pub t_ab: RigidTransform,
}

impl Demonstration {
    /// Object A at its demonstrated goal.
    pub fn goal_a(&self) -> PartDecomposedObject {
        self.object_a.transformed(&self.t_ab)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
        let demo: Demonstration = serde_json::from_str(&text)?;
        demo.object_a.validate()?;
        demo.object_b.validate()?;
        Ok(demo)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
