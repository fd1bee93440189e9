use std::collections::BTreeMap;
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use super::object::PartDecomposedObject;
use crate::error::{Error, Result};
use crate::geom::{adjacency_key, PointCloud};
use crate::registration::CpdConfig;
use crate::shapemodel::descriptors::ADJACENCY_FRACTION;
use crate::shapemodel::{default_latent_dim, label_parts, part_adjacency, train_part_model, CanonicalPartModel, ModelSet};

/// Shape models for every part of one object category plus the part adjacency they were trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryModels {
    pub category: String,
    pub adjacency: BTreeMap<String, Vec<String>>,
    pub models: ModelSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Latent dimension; `None` picks `min(K - 1, 4)`.
    pub latent_dim: Option<usize>,
    /// Training clouds are strided down to this many points per part.
    pub max_points: usize,
    pub cpd: CpdConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            latent_dim: None,
            max_points: 300,
            cpd: CpdConfig::default(),
        }
    }
}

impl CategoryModels {
    pub fn model(&self, part: &str) -> Result<&CanonicalPartModel> {
        self.models.get(part).ok_or_else(|| Error::MissingModel(part.to_string()))
    }

    /// Neighbors of `part` that are present in `obj`.
    pub fn present_neighbors(&self, part: &str, obj: &PartDecomposedObject) -> Vec<String> {
        self.adjacency
            .get(part)
            .into_iter()
            .flatten()
            .filter(|n| obj.parts.contains_key(*n))
            .cloned()
            .collect()
    }

    /// Adjacency label keys available for `part` in `obj`.
    pub fn adjacency_keys(&self, part: &str, obj: &PartDecomposedObject) -> Vec<String> {
        self.present_neighbors(part, obj).iter().map(|n| adjacency_key(n)).collect()
    }

    /// `obj` with relational and height labels on every part.
    pub fn label(&self, obj: &PartDecomposedObject) -> Result<PartDecomposedObject> {
        Ok(PartDecomposedObject {
            category: obj.category.clone(),
            parts: label_parts(&obj.parts, &self.adjacency)?,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (part, model) in &self.models {
            std::fs::write(dir.join(format!("{part}.json")), serde_json::to_string(model)?)?;
        }
        let index = ModelIndex {
            category: self.category.clone(),
            adjacency: self.adjacency.clone(),
            parts: self.models.keys().cloned().collect(),
        };
        std::fs::write(dir.join("index.json"), serde_json::to_string_pretty(&index)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let index_path = dir.join("index.json");
        let text = std::fs::read_to_string(&index_path)
            .map_err(|e| Error::from(e).context(format!("model index {}", index_path.display())))?;
        let index: ModelIndex = serde_json::from_str(&text)?;
        let mut models = ModelSet::new();
        for part in &index.parts {
            let path = dir.join(format!("{part}.json"));
            let text = std::fs::read_to_string(&path).map_err(|_| Error::MissingModel(part.clone()))?;
            models.insert(part.clone(), serde_json::from_str(&text).map_err(|e| Error::from(e).context(path.display().to_string()))?);
        }
        Ok(CategoryModels {
            category: index.category,
            adjacency: index.adjacency,
            models,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelIndex {
    category: String,
    adjacency: BTreeMap<String, Vec<String>>,
    parts: Vec<String>,
}

/// Union of part adjacencies over all instances, each at 5% of the instance's extent.
pub fn category_adjacency(instances: &[PartDecomposedObject]) -> BTreeMap<String, Vec<String>> {
    let mut adj: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for inst in instances {
        let local = part_adjacency(&inst.parts, ADJACENCY_FRACTION * inst.extent());
        for (part, neighbors) in local {
            let entry = adj.entry(part).or_default();
            for n in neighbors {
                if !entry.contains(&n) {
                    entry.push(n);
                }
            }
        }
    }
    for v in adj.values_mut() {
        v.sort();
    }
    adj
}

/// Trains one model per part from pose-aligned instances of a category.
pub fn train_category(instances: &[PartDecomposedObject], cfg: &TrainConfig) -> Result<CategoryModels> {
    let first = instances
        .first()
        .ok_or_else(|| Error::Invalid("no training instances".into()))?;
    let category = first.category.clone();
    let parts = first.part_names();
    for (j, inst) in instances.iter().enumerate() {
        if inst.part_names() != parts {
            return Err(Error::Invalid(format!("training instance {j} has parts {:?}, expected {parts:?}", inst.part_names())));
        }
    }
    let adjacency = category_adjacency(instances);
    let labeled: Vec<BTreeMap<String, PointCloud>> = instances
        .iter()
        .map(|inst| {
            let down: BTreeMap<String, PointCloud> = inst
                .parts
                .iter()
                .map(|(k, c)| (k.clone(), c.downsample(cfg.max_points)))
                .collect();
            label_parts(&down, &adjacency)
        })
        .collect::<Result<_>>()?;
    let k = instances.len();
    let d = cfg.latent_dim.unwrap_or_else(|| default_latent_dim(k));
    let mut models = ModelSet::new();
    for part in &parts {
        let clouds: Vec<PointCloud> = labeled.iter().map(|l| l[part].clone()).collect();
        let neighbors = adjacency.get(part).cloned().unwrap_or_default();
        let model = train_part_model(part, &clouds, &neighbors, d, &cfg.cpd).map_err(|e| e.context(format!("part `{part}`")))?;
        info!(
            "{category}/{part}: canonical instance {}, variance ratios {:?}",
            model.canonical_instance, model.variance_ratios
        );
        models.insert(part.clone(), model);
    }
    Ok(CategoryModels {
        category,
        adjacency,
        models,
    })
}

/// The trivial decomposition: all parts merged into one part named after the category.
pub fn as_whole_object(obj: &PartDecomposedObject, max_points: usize) -> PartDecomposedObject {
    let mut parts = BTreeMap::new();
    parts.insert(obj.category.clone(), obj.merged().downsample(max_points));
    PartDecomposedObject {
        category: obj.category.clone(),
        parts,
    }
}
