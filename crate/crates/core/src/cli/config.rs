use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::shapemodel::InferenceConfig;
use crate::synth::{Family, Task, CHECK_POINTS_PER_PART, PENETRATION_TOLERANCE};
use crate::transfer::{PlacementConfig, TrainConfig, TransferConfig, DEFAULT_K_MAX};

/// Everything a command needs besides its positional arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub dataset_dir: PathBuf,
    pub model_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Master seed; every random draw of every command derives from it.
    pub seed: u64,
    pub jobs: usize,
    pub gen: GenConfig,
    pub train: TrainConfig,
    pub inference: InferenceConfig,
    /// Interaction radius relative to the combined goal diagonal; `null` takes the task default.
    pub delta_fraction: Option<f64>,
    pub k_max: usize,
    pub placement: PlacementConfig,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    /// Leading pairs of a dataset drawn from the training family.
    pub train_count: usize,
    pub points_per_part: usize,
    pub test_family: Family,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub trials: usize,
    pub pose_box: f64,
    pub noise_sigma: f64,
    pub tolerance: f64,
    pub check_points_per_part: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_dir: PathBuf::from("data"),
            model_dir: PathBuf::from("models"),
            output_dir: PathBuf::from("out"),
            seed: 0,
            jobs: 1,
            gen: GenConfig::default(),
            train: TrainConfig::default(),
            inference: InferenceConfig::default(),
            delta_fraction: None,
            k_max: DEFAULT_K_MAX,
            placement: PlacementConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            train_count: 5,
            points_per_part: 300,
            test_family: Family::RaisedPeg,
        }
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            trials: 50,
            pose_box: 0.5,
            noise_sigma: 0.0,
            tolerance: PENETRATION_TOLERANCE,
            check_points_per_part: CHECK_POINTS_PER_PART,
        }
    }
}

impl RunConfig {
    /// Reads a JSON config; keys the config does not know are rejected.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("config {}", path.display())))?;
        let raw: Value = serde_json::from_str(&text).map_err(|e| Error::from(e).context(format!("config {}", path.display())))?;
        Self::from_value(raw)
    }

    pub fn from_value(raw: Value) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_value(raw.clone())?;
        check_known(&raw, &serde_json::to_value(&cfg)?, "")?;
        Ok(cfg)
    }

    /// Applies `a.b.c=value` overrides. Values parse as JSON, falling back to a bare string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut tree = serde_json::to_value(self)?;
        for o in overrides {
            let o = o.as_ref();
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("override `{o}` is not key=value")))?;
            let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
            let mut node = &mut tree;
            for seg in key.split('.') {
                node = node
                    .as_object_mut()
                    .and_then(|m| m.get_mut(seg))
                    .ok_or_else(|| Error::Invalid(format!("unknown config key `{key}`")))?;
            }
            *node = value;
        }
        Self::from_value(tree).map_err(|e| e.context("applying overrides"))
    }

    pub fn transfer_config(&self, task: Task) -> TransferConfig {
        TransferConfig {
            inference: self.inference.with_seed(self.seed),
            delta_fraction: self.delta_fraction.unwrap_or(task.interaction_fraction()),
            k_max: self.k_max,
            placement: self.placement,
        }
    }
}

/// Every key of `raw` must exist in `known`, the re-serialized config.
fn check_known(raw: &Value, known: &Value, prefix: &str) -> Result<()> {
    if let (Value::Object(r), Value::Object(k)) = (raw, known) {
        for (key, v) in r {
            let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
            match k.get(key) {
                Some(kv) => check_known(v, kv, &path)?,
                None => return Err(Error::Invalid(format!("unknown config key `{path}`"))),
            }
        }
    }
    Ok(())
}
