use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::TestSet;
use crate::synth::{Family, ParametricObjectSpec, Task};
use crate::transfer::PartDecomposedObject;

pub const MANIFEST: &str = "manifest.json";
pub const DEMO: &str = "demo.json";

/// Index of a generated dataset. Paths are relative to the dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub task: Task,
    pub seed: u64,
    pub points_per_part: usize,
    pub test_family: Family,
    pub demo: DemoEntry,
    pub train: Vec<PairEntry>,
    pub test: Vec<PairEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoEntry {
    pub file: PathBuf,
    pub spec_a: ParametricObjectSpec,
    pub spec_b: ParametricObjectSpec,
}

/// One object pair: its spec file and the two sampled clouds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub id: String,
    pub spec: PathBuf,
    pub object_a: PathBuf,
    pub object_b: PathBuf,
}

/// Contents of a pair's spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub a: ParametricObjectSpec,
    pub b: ParametricObjectSpec,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::from(e).context(format!("manifest {}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::from(e).context(path.display().to_string()))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST), self)
    }

    /// Both objects of every training pair.
    pub fn training_objects(&self, dir: &Path) -> Result<(Vec<PartDecomposedObject>, Vec<PartDecomposedObject>)> {
        let mut a = Vec::with_capacity(self.train.len());
        let mut b = Vec::with_capacity(self.train.len());
        for p in &self.train {
            a.push(PartDecomposedObject::load(&dir.join(&p.object_a))?);
            b.push(PartDecomposedObject::load(&dir.join(&p.object_b))?);
        }
        Ok((a, b))
    }

    pub fn test_set(&self, dir: &Path) -> Result<TestSet> {
        let pairs = self
            .test
            .iter()
            .map(|p| read_json::<PairSpec>(&dir.join(&p.spec)).map(|s| (s.a, s.b)))
            .collect::<Result<_>>()?;
        Ok(TestSet { task: self.task, pairs })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::from(e).context(path.display().to_string()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    serde_json::from_str(&text).map_err(|e| Error::from(e).context(path.display().to_string()))
}
