use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::objects::{
    generate, mug_handle_center, AnalyticSdf, Category, GeneratedObject, ParametricObjectSpec, RackPeg, TeapotSpout,
    CUP_WALL, PEG_RADIUS, TRUNK_RADIUS,
};
use crate::error::{Error, Result};
use crate::geom::{Point3, RigidTransform, Vec3};
use crate::transfer::Demonstration;

/// Penetration tolerance for a valid placement, in meters.
pub const PENETRATION_TOLERANCE: f64 = 1e-3;

/// Points per part used when checking penetration against analytic geometry.
pub const CHECK_POINTS_PER_PART: usize = 1500;

/// Gap kept between the peg and the mug in the demonstrated hanging pose.
const HANG_CLEARANCE: f64 = 0.002;
/// Height of the bowl above its resting contact.
const REST_GAP: f64 = 0.0005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    MugOnRack,
    BowlOnMug,
    TeapotPourAlign,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::MugOnRack, Task::BowlOnMug, Task::TeapotPourAlign];

    pub fn name(self) -> &'static str {
        match self {
            Task::MugOnRack => "mug_on_rack",
            Task::BowlOnMug => "bowl_on_mug",
            Task::TeapotPourAlign => "teapot_pour_align",
        }
    }

    /// Categories of the moved object A and the fixed object B.
    pub fn categories(self) -> (Category, Category) {
        match self {
            Task::MugOnRack => (Category::Mug, Category::Rack),
            Task::BowlOnMug => (Category::Bowl, Category::Mug),
            Task::TeapotPourAlign => (Category::Teapot, Category::Mug),
        }
    }

    /// Interaction radius as a fraction of the combined bounding-box diagonal.
    ///
    /// The pouring pose keeps the spout clear of the rim by a few centimeters,
    /// so it needs a wider radius to register any contact. A bowl touches the
    /// mug only along the thin rim, which sparse samples often miss at 2%.
    pub fn interaction_fraction(self) -> f64 {
        match self {
            Task::TeapotPourAlign => 0.08,
            Task::BowlOnMug => 0.04,
            Task::MugOnRack => 0.02,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown task `{s}`")))
    }
}

/// A synthetic demonstration with everything needed to check it.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDemo {
    pub task: Task,
    pub a: GeneratedObject,
    pub b: GeneratedObject,
    /// Object A's frame → world in the initial scene.
    pub pose_a: RigidTransform,
    /// Object B's frame → world.
    pub pose_b: RigidTransform,
    /// Object A's frame → world at the goal.
    pub goal_a: RigidTransform,
    pub demo: Demonstration,
}

/// Initial pose of object A in generated demonstrations.
pub fn default_initial_pose() -> RigidTransform {
    RigidTransform::from_euler(0.7, 0.0, 0.0, Vec3::new(0.35, -0.25, 0.0))
}

/// Goal pose of A expressed in B's frame.
pub fn goal_pose(task: Task, spec_a: &ParametricObjectSpec, spec_b: &ParametricObjectSpec) -> Result<RigidTransform> {
    check_categories(task, spec_a, spec_b)?;
    spec_a.validate()?;
    spec_b.validate()?;
    match task {
        Task::MugOnRack => {
            let (x_p, z_p) = hang_point(spec_a)?;
            let peg = RackPeg::of(spec_b);
            let r = spec_a.get("cup_radius");
            let axial = (TRUNK_RADIUS + 0.6 * peg.length).max(TRUNK_RADIUS + r + 0.005);
            if axial + PEG_RADIUS > peg.total_length() {
                return Err(Error::InfeasiblePair(format!(
                    "peg of length {:.3} too short for cup radius {r:.3}",
                    peg.length
                )));
            }
            let d = peg.direction;
            let up = Vec3::new(-d.z, 0.0, d.x);
            let rot = nalgebra::Matrix3::from_columns(&[-Vec3::y(), d, up]);
            let q = peg.root + d * axial;
            let rot_t = RigidTransform::new(rot, Vec3::zeros())?;
            let t = q.coords - rot_t.apply_vector(&Vec3::new(x_p, 0.0, z_p));
            RigidTransform::new(rot, t)
        }
        Task::BowlOnMug => {
            let ri = spec_b.get("cup_radius") - CUP_WALL;
            let h = spec_b.get("cup_height");
            let (rb, rt, bh) = (spec_a.get("bowl_bottom_radius"), spec_a.get("bowl_top_radius"), spec_a.get("bowl_height"));
            if rt <= ri + 0.003 {
                return Err(Error::InfeasiblePair(format!(
                    "bowl top radius {rt:.3} does not span cup opening {ri:.3}"
                )));
            }
            Ok(RigidTransform::from_translation(Vec3::new(0.0, 0.0, bowl_rest_height(rb, rt, bh, ri, h) + REST_GAP)))
        }
        Task::TeapotPourAlign => {
            let spout = TeapotSpout::of(spec_a);
            let ri = spec_b.get("cup_radius") - CUP_WALL;
            let tip = spout.tip();
            let target = Point3::new(-(ri - 0.01), 0.0, spec_b.get("cup_height") + pour_height(spec_a, spec_b));
            Ok(RigidTransform::from_translation(target - tip))
        }
    }
}

/// Where the peg axis crosses the handle plane, in mug coordinates `(x, z)`.
fn hang_point(mug: &ParametricObjectSpec) -> Result<(f64, f64)> {
    let c = mug_handle_center(mug);
    let inner = mug.get("handle_radius") - mug.get("handle_thickness");
    let x_p = mug.get("cup_radius") + HANG_CLEARANCE + PEG_RADIUS;
    let dx = x_p - c.x;
    let room = inner - HANG_CLEARANCE - PEG_RADIUS;
    if dx >= room {
        return Err(Error::InfeasiblePair(format!(
            "handle opening {inner:.4} too small for the peg"
        )));
    }
    // peg as high in the loop as the clearance allows
    let z_p = c.z + (room * room - dx * dx).sqrt();
    Ok((x_p, z_p))
}

/// Height of the bowl's bottom when it rests in a cup opening of radius `ri` at rim height `h`.
fn bowl_rest_height(rb: f64, rt: f64, bh: f64, ri: f64, h: f64) -> f64 {
    if rb >= ri {
        h
    } else {
        h - bh * (ri - rb) / (rt - rb)
    }
}

/// Height of the spout tip above the rim that keeps the spout clear of the rim.
fn pour_height(teapot: &ParametricObjectSpec, mug: &ParametricObjectSpec) -> f64 {
    let a = teapot.get("spout_angle");
    let spout = TeapotSpout::of(teapot);
    let back = mug.get("cup_radius") - (mug.get("cup_radius") - CUP_WALL - 0.01);
    back * a.tan() + (spout.tip_radius + 0.002) / a.cos() + 0.003
}

fn check_categories(task: Task, a: &ParametricObjectSpec, b: &ParametricObjectSpec) -> Result<()> {
    let (ca, cb) = task.categories();
    if a.category != ca || b.category != cb {
        return Err(Error::Invalid(format!(
            "task {task} needs ({ca}, {cb}), got ({}, {})",
            a.category, b.category
        )));
    }
    Ok(())
}

/// Analytic success predicate for object A placed at `rel` (A's frame → B's frame).
pub fn task_predicate(task: Task, spec_a: &ParametricObjectSpec, spec_b: &ParametricObjectSpec, rel: &RigidTransform) -> bool {
    match task {
        Task::MugOnRack => {
            let peg = RackPeg::of(spec_b);
            let inv = rel.inverse();
            let p0 = inv.apply(&peg.root);
            let p1 = inv.apply(&peg.tip());
            // crossing of the peg axis with the handle plane y = 0
            if (p0.y > 0.0) == (p1.y > 0.0) || p0.y == p1.y {
                return false;
            }
            let s = p0.y / (p0.y - p1.y);
            let q = p0 + (p1 - p0) * s;
            let c = mug_handle_center(spec_a);
            let inner = spec_a.get("handle_radius") - spec_a.get("handle_thickness");
            q.x > spec_a.get("cup_radius") && (q.x - c.x).hypot(q.z - c.z) < inner
        }
        Task::BowlOnMug => {
            let ri = spec_b.get("cup_radius") - CUP_WALL;
            let rest = bowl_rest_height(
                spec_a.get("bowl_bottom_radius"),
                spec_a.get("bowl_top_radius"),
                spec_a.get("bowl_height"),
                ri,
                spec_b.get("cup_height"),
            );
            let axis = rel.apply_vector(&Vec3::z());
            let tilt = axis.z.clamp(-1.0, 1.0).acos();
            let bottom = rel.apply(&Point3::origin());
            tilt < 10f64.to_radians()
                && bottom.x.hypot(bottom.y) < 0.5 * ri
                && bottom.z >= rest - 0.005
                && bottom.z <= rest + 0.01
        }
        Task::TeapotPourAlign => {
            let tip = rel.apply(&TeapotSpout::of(spec_a).tip());
            let ri = spec_b.get("cup_radius") - CUP_WALL;
            let h = spec_b.get("cup_height");
            tip.x.hypot(tip.y) < ri && tip.z >= h && tip.z <= h + 0.05
        }
    }
}

/// Two-way penetration between A at `rel` (in B's frame) and B, from dense surface samples.
pub fn pair_penetration(
    spec_a: &ParametricObjectSpec,
    sdf_a: &AnalyticSdf,
    spec_b: &ParametricObjectSpec,
    sdf_b: &AnalyticSdf,
    rel: &RigidTransform,
) -> Result<f64> {
    let dense_a = generate(spec_a, CHECK_POINTS_PER_PART)?;
    let dense_b = generate(spec_b, CHECK_POINTS_PER_PART)?;
    let placed_a = rel.apply_points(&dense_a.object.all_points());
    let placed_sdf_a = sdf_a.transformed(rel);
    let into_b = sdf_b.penetration(&placed_a);
    let into_a = placed_sdf_a.penetration(&dense_b.object.all_points());
    Ok(into_b.max(into_a))
}

/// Builds a demonstration with an analytic goal verified against both objects' geometry.
pub fn generate_demo(
    task: Task,
    spec_a: &ParametricObjectSpec,
    spec_b: &ParametricObjectSpec,
    points_per_part: usize,
) -> Result<GeneratedDemo> {
    let rel = goal_pose(task, spec_a, spec_b)?;
    let a = generate(spec_a, points_per_part)?;
    let b = generate(spec_b, points_per_part)?;
    let depth = pair_penetration(spec_a, &a.sdf, spec_b, &b.sdf, &rel)?;
    if depth > PENETRATION_TOLERANCE {
        return Err(Error::InfeasiblePair(format!(
            "goal penetrates by {:.2} mm",
            depth * 1e3
        )));
    }
    if !task_predicate(task, spec_a, spec_b, &rel) {
        return Err(Error::InfeasiblePair(format!("goal for {task} fails its task predicate")));
    }
    let pose_b = RigidTransform::identity();
    let pose_a = default_initial_pose();
    let goal_a = pose_b.compose(&rel);
    let t_ab = goal_a.compose(&pose_a.inverse());
    let demo = Demonstration {
        object_a: a.object.transformed(&pose_a),
        object_b: b.object.transformed(&pose_b),
        t_ab,
    };
    Ok(GeneratedDemo {
        task,
        a,
        b,
        pose_a,
        pose_b,
        goal_a,
        demo,
    })
}

/// Default specs for a task's two objects.
pub fn default_pair(task: Task, seed: u64) -> (ParametricObjectSpec, ParametricObjectSpec) {
    let (ca, cb) = task.categories();
    (ParametricObjectSpec::new(ca, seed), ParametricObjectSpec::new(cb, seed.wrapping_add(1)))
}
