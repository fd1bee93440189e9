//! Skill transfer: interaction points, per-pair alignment, relation
//! selection and whole-object placement.

mod interaction;
mod models;
mod object;
mod pipeline;
mod placement;

pub use interaction::{
    align_pair, close_pairs, extract_interaction_points, moved_fit, transfer_points, world_displacements, FitSet,
    InteractionPointSet, MIN_PAIRS,
};
pub use models::{as_whole_object, category_adjacency, train_category, CategoryModels, TrainConfig};
pub use object::{Demonstration, PartDecomposedObject};
pub use pipeline::{
    analyze_demo, fit_object, fit_parts, goal_extent, place, placement_score, select_relevant_relations, transfer,
    resampled, whole_object_baseline, DemoAnalysis, Relation, RelationSet, RelationTransform, TransferConfig, TransferResult,
    WholeObject, DEFAULT_DELTA_FRACTION, DEFAULT_K_MAX, MAX_RELATIONS,
};
pub use placement::{optimize_placement, Placement, PlacementConfig, PlacementTerm};
