//! Procedural test world: parametric objects with exact geometry, partial
//! views and demonstrations with analytic goals.

mod demo;
mod family;
mod objects;
mod primitives;
mod view;

pub use demo::{
    default_initial_pose, default_pair, generate_demo, goal_pose, pair_penetration, task_predicate, GeneratedDemo,
    Task, CHECK_POINTS_PER_PART, PENETRATION_TOLERANCE,
};
pub use family::Family;
pub use objects::{
    build_geometry, generate, jitter, mug_handle_center, AnalyticSdf, Category, GeneratedObject, ParamRange,
    ParametricObjectSpec, RackPeg, TeapotSpout, BASE_HALF, BOWL_WALL, CUP_WALL, PEG_RADIUS, TRUNK_RADIUS,
};
pub use primitives::{polygon_sdf, Primitive, Shape, SurfaceCoord};
pub use view::{partial_view, visible, CameraSpec, PartialView};
