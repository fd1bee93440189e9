//! Per-part generative shape models: training from a handful of pose-aligned
//! instances, reconstruction from a latent vector, and joint latent + pose
//! inference against observed clouds.

pub mod descriptors;
mod infer;
mod model;
mod search;

pub use descriptors::{label_parts, part_adjacency, relational_labels, z_labels, RELATION_RATIO};
pub use infer::{infer, initializations, observation_frame, objective_keys, warp_point_indices, FitObjective, InferenceConfig, InferenceResult};
pub use model::{
    default_latent_dim, select_canonical, train_part_model, CanonicalPartModel, LatentVector, ModelSet,
    MAX_TRAINING_INSTANCES, MIN_TRAINING_INSTANCES,
};
pub use search::PatternSearch;
