use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::primitives::{Primitive, Shape, SurfaceCoord};
use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud, RigidTransform, Vec3};
use crate::transfer::PartDecomposedObject;

pub const CUP_WALL: f64 = 0.004;
pub const BOWL_WALL: f64 = 0.003;
pub const TRUNK_RADIUS: f64 = 0.01;
pub const PEG_RADIUS: f64 = 0.005;
pub const BASE_HALF: [f64; 3] = [0.08, 0.08, 0.01];
/// Depth the trunk root and spout root are sunk into their supporting part.
const EMBED: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Mug,
    Rack,
    Bowl,
    Teapot,
}

/// Documented range of one shape parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRange {
    pub name: &'static str,
    pub default: f64,
    pub min: f64,
    pub max: f64,
}

const fn p(name: &'static str, default: f64, min: f64, max: f64) -> ParamRange {
    ParamRange { name, default, min, max }
}

const MUG_PARAMS: &[ParamRange] = &[
    p("cup_radius", 0.04, 0.025, 0.06),
    p("cup_height", 0.09, 0.06, 0.13),
    p("handle_radius", 0.03, 0.015, 0.04),
    p("handle_thickness", 0.005, 0.003, 0.009),
    p("handle_height_offset", 0.0, -0.02, 0.02),
];
const RACK_PARAMS: &[ParamRange] = &[
    p("trunk_height", 0.3, 0.2, 0.45),
    p("peg_length", 0.1, 0.05, 0.15),
    p("peg_height", 0.2, 0.08, 0.4),
    p("peg_angle", 0.3, 0.0, 0.7),
];
const BOWL_PARAMS: &[ParamRange] = &[
    p("bowl_bottom_radius", 0.035, 0.02, 0.06),
    p("bowl_top_radius", 0.07, 0.03, 0.1),
    p("bowl_height", 0.05, 0.03, 0.08),
];
const TEAPOT_PARAMS: &[ParamRange] = &[
    p("body_radius", 0.06, 0.045, 0.08),
    p("body_height", 0.09, 0.07, 0.12),
    p("spout_length", 0.08, 0.05, 0.11),
    p("spout_angle", 0.6, 0.3, 0.9),
    p("handle_radius", 0.03, 0.02, 0.04),
    p("handle_thickness", 0.006, 0.004, 0.008),
    p("lid_radius", 0.03, 0.02, 0.04),
];

impl Category {
    pub const ALL: [Category; 4] = [Category::Mug, Category::Rack, Category::Bowl, Category::Teapot];

    pub fn name(self) -> &'static str {
        match self {
            Category::Mug => "mug",
            Category::Rack => "rack",
            Category::Bowl => "bowl",
            Category::Teapot => "teapot",
        }
    }

    /// Fixed part decomposition.
    pub fn parts(self) -> &'static [&'static str] {
        match self {
            Category::Mug => &["cup", "handle"],
            Category::Rack => &["base", "trunk", "peg"],
            Category::Bowl => &["bowl"],
            Category::Teapot => &["body", "spout", "handle", "lid"],
        }
    }

    pub fn parameters(self) -> &'static [ParamRange] {
        match self {
            Category::Mug => MUG_PARAMS,
            Category::Rack => RACK_PARAMS,
            Category::Bowl => BOWL_PARAMS,
            Category::Teapot => TEAPOT_PARAMS,
        }
    }

    pub fn parameter(self, name: &str) -> Option<&'static ParamRange> {
        self.parameters().iter().find(|r| r.name == name)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown category `{s}`")))
    }
}

/// A procedural object: category, parameter overrides (missing ones take defaults) and sampling seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricObjectSpec {
    pub category: Category,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    pub seed: u64,
}

impl ParametricObjectSpec {
    pub fn new(category: Category, seed: u64) -> Self {
        ParametricObjectSpec {
            category,
            parameters: BTreeMap::new(),
            seed,
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.parameters.insert(name.to_string(), value);
        self
    }

    /// Value of `name`, falling back to its default. Panics on names the category does not define.
    pub fn get(&self, name: &str) -> f64 {
        let range = self
            .category
            .parameter(name)
            .unwrap_or_else(|| panic!("`{name}` is not a {} parameter", self.category));
        self.parameters.get(name).copied().unwrap_or(range.default)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, &value) in &self.parameters {
            let range = self
                .category
                .parameter(name)
                .ok_or_else(|| Error::UnknownParameter(name.clone()))?;
            if !(value >= range.min && value <= range.max) {
                return Err(out_of_range(name, value, range.min, range.max));
            }
        }
        match self.category {
            Category::Mug => {
                let limit = self.get("cup_height") / 2.0 - self.get("handle_height_offset").abs() - self.get("handle_thickness");
                check_max("handle_radius", self.get("handle_radius"), self.category, limit)?;
                let hole = self.get("handle_radius") - self.get("handle_thickness") - CUP_WALL / 2.0;
                if hole <= 0.0 {
                    return Err(out_of_range(
                        "handle_thickness",
                        self.get("handle_thickness"),
                        MUG_PARAMS[3].min,
                        self.get("handle_radius") - CUP_WALL / 2.0,
                    ));
                }
            }
            Category::Rack => {
                check_max("peg_height", self.get("peg_height"), self.category, self.get("trunk_height") - 0.02)?;
            }
            Category::Bowl => {
                let min_top = self.get("bowl_bottom_radius") + 0.005;
                let top = self.get("bowl_top_radius");
                if top < min_top {
                    return Err(out_of_range("bowl_top_radius", top, min_top, BOWL_PARAMS[1].max));
                }
            }
            Category::Teapot => {
                check_max("lid_radius", self.get("lid_radius"), self.category, self.get("body_radius") - 0.01)?;
            }
        }
        Ok(())
    }
}

fn out_of_range(name: &str, value: f64, min: f64, max: f64) -> Error {
    Error::ParameterOutOfRange {
        name: name.to_string(),
        value,
        min,
        max,
    }
}

fn check_max(name: &str, value: f64, category: Category, max: f64) -> Result<()> {
    let range = category.parameter(name).unwrap();
    if value > max {
        return Err(out_of_range(name, value, range.min, max.min(range.max)));
    }
    Ok(())
}

/// Exact geometry of an object: one primitive per part, in the object frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSdf {
    pub parts: BTreeMap<String, Primitive>,
}

impl AnalyticSdf {
    /// Signed distance to the union of all parts.
    pub fn sdf(&self, p: &Point3) -> f64 {
        self.parts.values().map(|prim| prim.sdf(p)).fold(f64::INFINITY, f64::min)
    }

    pub fn part_sdf(&self, part: &str, p: &Point3) -> Result<f64> {
        self.parts
            .get(part)
            .map(|prim| prim.sdf(p))
            .ok_or_else(|| Error::Invalid(format!("no part `{part}` in geometry")))
    }

    /// The same geometry moved rigidly by `t`.
    pub fn transformed(&self, t: &RigidTransform) -> AnalyticSdf {
        AnalyticSdf {
            parts: self
                .parts
                .iter()
                .map(|(k, prim)| (k.clone(), Primitive::new(prim.shape.clone(), t.compose(&prim.frame))))
                .collect(),
        }
    }

    /// Deepest penetration of `points` into the geometry, `max(0, -sdf)`.
    pub fn penetration<'a>(&self, points: impl IntoIterator<Item = &'a Point3>) -> f64 {
        points.into_iter().map(|p| (-self.sdf(p)).max(0.0)).fold(0.0, f64::max)
    }
}

/// Builds the analytic geometry for a validated spec.
pub fn build_geometry(spec: &ParametricObjectSpec) -> Result<AnalyticSdf> {
    spec.validate()?;
    let g = |n: &str| spec.get(n);
    let mut parts = BTreeMap::new();
    let revolved = |profile: Vec<[f64; 2]>, frame: RigidTransform| Primitive::new(Shape::Revolved { profile }, frame);
    match spec.category {
        Category::Mug => {
            let (r, h, w) = (g("cup_radius"), g("cup_height"), CUP_WALL);
            parts.insert(
                "cup".to_string(),
                revolved(
                    vec![[0.0, 0.0], [r, 0.0], [r, h], [r - w, h], [r - w, w], [0.0, w]],
                    RigidTransform::identity(),
                ),
            );
            parts.insert(
                "handle".to_string(),
                Primitive::new(
                    Shape::TorusArc {
                        major: g("handle_radius"),
                        minor: g("handle_thickness"),
                        half_angle: FRAC_PI_2,
                    },
                    RigidTransform::from_translation(mug_handle_center(spec).coords),
                ),
            );
        }
        Category::Rack => {
            let [bx, by, bz] = BASE_HALF;
            parts.insert(
                "base".to_string(),
                Primitive::new(
                    Shape::Cuboid { half: [bx, by, bz] },
                    RigidTransform::from_translation(Vec3::new(0.0, 0.0, bz)),
                ),
            );
            let trunk_len = g("trunk_height") - 2.0 * bz + EMBED;
            parts.insert(
                "trunk".to_string(),
                revolved(
                    rod_profile(TRUNK_RADIUS, TRUNK_RADIUS, trunk_len),
                    RigidTransform::from_translation(Vec3::new(0.0, 0.0, 2.0 * bz - EMBED)),
                ),
            );
            let peg = RackPeg::of(spec);
            parts.insert(
                "peg".to_string(),
                revolved(rod_profile(PEG_RADIUS, PEG_RADIUS, peg.total_length()), peg.frame()),
            );
        }
        Category::Bowl => {
            let (rb, rt, h, w) = (g("bowl_bottom_radius"), g("bowl_top_radius"), g("bowl_height"), BOWL_WALL);
            parts.insert(
                "bowl".to_string(),
                revolved(
                    vec![[0.0, 0.0], [rb, 0.0], [rt, h], [rt - w, h], [rb - w, w], [0.0, w]],
                    RigidTransform::identity(),
                ),
            );
        }
        Category::Teapot => {
            let (r, h, lr) = (g("body_radius"), g("body_height"), g("lid_radius"));
            parts.insert(
                "body".to_string(),
                revolved(
                    vec![
                        [0.0, 0.0],
                        [0.8 * r, 0.0],
                        [r, 0.25 * h],
                        [r, 0.7 * h],
                        [lr + 0.004, h],
                        [0.0, h],
                    ],
                    RigidTransform::identity(),
                ),
            );
            parts.insert(
                "lid".to_string(),
                revolved(
                    vec![[0.0, 0.0], [lr, 0.0], [lr, 0.008], [0.3 * lr, 0.02], [0.0, 0.02]],
                    RigidTransform::from_translation(Vec3::new(0.0, 0.0, h)),
                ),
            );
            let spout = TeapotSpout::of(spec);
            parts.insert(
                "spout".to_string(),
                revolved(
                    vec![[0.0, 0.0], [spout.root_radius, 0.0], [spout.tip_radius, spout.total_length], [0.0, spout.total_length]],
                    spout.frame(),
                ),
            );
            parts.insert(
                "handle".to_string(),
                Primitive::new(
                    Shape::TorusArc {
                        major: g("handle_radius"),
                        minor: g("handle_thickness"),
                        half_angle: FRAC_PI_2,
                    },
                    RigidTransform::from_euler(PI, 0.0, 0.0, Vec3::new(-(r - 0.004), 0.0, 0.5 * h)),
                ),
            );
        }
    }
    Ok(AnalyticSdf { parts })
}

fn rod_profile(r0: f64, r1: f64, len: f64) -> Vec<[f64; 2]> {
    vec![[0.0, 0.0], [r0, 0.0], [r1, len], [0.0, len]]
}

/// Center of the mug's handle arc, at mid-wall so the arc ends are embedded.
pub fn mug_handle_center(spec: &ParametricObjectSpec) -> Point3 {
    Point3::new(
        spec.get("cup_radius") - CUP_WALL / 2.0,
        0.0,
        spec.get("cup_height") / 2.0 + spec.get("handle_height_offset"),
    )
}

/// Peg of a rack: rooted on the trunk axis, tilted upward in the xz-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RackPeg {
    pub root: Point3,
    pub direction: Vec3,
    /// Length protruding beyond the trunk surface.
    pub length: f64,
}

impl RackPeg {
    pub fn of(spec: &ParametricObjectSpec) -> Self {
        let a = spec.get("peg_angle");
        RackPeg {
            root: Point3::new(0.0, 0.0, spec.get("peg_height")),
            direction: Vec3::new(a.cos(), 0.0, a.sin()),
            length: spec.get("peg_length"),
        }
    }

    pub fn total_length(&self) -> f64 {
        self.length + TRUNK_RADIUS
    }

    pub fn tip(&self) -> Point3 {
        self.root + self.direction * self.total_length()
    }

    /// Maps local z onto the peg direction, with the origin at the root.
    pub fn frame(&self) -> RigidTransform {
        let beta = FRAC_PI_2 - self.direction.z.atan2(self.direction.x);
        RigidTransform::from_axis_angle(Vec3::y(), beta, self.root.coords)
    }
}

/// Teapot spout: a frustum leaving the body wall at `angle` above horizontal toward +x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeapotSpout {
    pub root: Point3,
    pub direction: Vec3,
    pub total_length: f64,
    pub root_radius: f64,
    pub tip_radius: f64,
}

impl TeapotSpout {
    pub fn of(spec: &ParametricObjectSpec) -> Self {
        let a = spec.get("spout_angle");
        let embed = 0.004;
        TeapotSpout {
            root: Point3::new(spec.get("body_radius") - embed, 0.0, 0.45 * spec.get("body_height")),
            direction: Vec3::new(a.cos(), 0.0, a.sin()),
            total_length: spec.get("spout_length") + embed,
            root_radius: 0.014,
            tip_radius: 0.007,
        }
    }

    /// Center of the spout's end face.
    pub fn tip(&self) -> Point3 {
        self.root + self.direction * self.total_length
    }

    pub fn frame(&self) -> RigidTransform {
        let beta = FRAC_PI_2 - self.direction.z.atan2(self.direction.x);
        RigidTransform::from_axis_angle(Vec3::y(), beta, self.root.coords)
    }
}

/// A sampled object together with its exact geometry and the intrinsic
/// surface coordinate of every sampled point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedObject {
    pub spec: ParametricObjectSpec,
    pub object: PartDecomposedObject,
    pub sdf: AnalyticSdf,
    pub correspondences: BTreeMap<String, Vec<SurfaceCoord>>,
}

impl GeneratedObject {
    /// Location of `coord` on `part` of this object (object frame).
    pub fn point_at(&self, part: &str, coord: &SurfaceCoord) -> Result<Point3> {
        self.sdf
            .parts
            .get(part)
            .map(|prim| prim.surface_point(coord))
            .ok_or_else(|| Error::Invalid(format!("no part `{part}` in geometry")))
    }
}

fn part_seed(seed: u64, part_index: usize) -> u64 {
    seed ^ (part_index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Samples `points_per_part` area-uniform surface points on every part.
pub fn generate(spec: &ParametricObjectSpec, points_per_part: usize) -> Result<GeneratedObject> {
    if points_per_part == 0 {
        return Err(Error::Invalid("points_per_part must be ≥ 1".into()));
    }
    let sdf = build_geometry(spec)?;
    let mut parts = BTreeMap::new();
    let mut correspondences = BTreeMap::new();
    for (i, name) in spec.category.parts().iter().enumerate() {
        let prim = &sdf.parts[*name];
        let mut rng = ChaCha8Rng::seed_from_u64(part_seed(spec.seed, i));
        let faces = WeightedIndex::new(prim.face_areas()).map_err(|e| Error::Invalid(e.to_string()))?;
        let coords: Vec<SurfaceCoord> = (0..points_per_part)
            .map(|_| {
                let face = faces.sample(&mut rng) as u16;
                prim.sample_on_face(face, &mut rng)
            })
            .collect();
        let points = coords.iter().map(|c| prim.surface_point(c)).collect();
        parts.insert(name.to_string(), PointCloud::new(points));
        correspondences.insert(name.to_string(), coords);
    }
    Ok(GeneratedObject {
        spec: spec.clone(),
        object: PartDecomposedObject::new(spec.category.name(), parts)?,
        sdf,
        correspondences,
    })
}

/// Adds isotropic Gaussian noise of standard deviation `sigma` to every point.
pub fn jitter(obj: &PartDecomposedObject, sigma: f64, seed: u64) -> Result<PartDecomposedObject> {
    if sigma == 0.0 {
        return Ok(obj.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = obj.clone();
    for cloud in out.parts.values_mut() {
        for p in &mut cloud.points {
            *p += Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{symmetric_chamfer, NeighborIndex};

    #[test]
    fn deterministic_and_on_surface() {
        for cat in Category::ALL {
            let spec = ParametricObjectSpec::new(cat, 7);
            let a = generate(&spec, 200).unwrap();
            let b = generate(&spec, 200).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.object.parts.len(), cat.parts().len());
            for (name, cloud) in &a.object.parts {
                assert_eq!(cloud.len(), 200);
                for p in &cloud.points {
                    assert!(a.sdf.part_sdf(name, p).unwrap().abs() < 1e-6, "{cat} {name}");
                }
            }
        }
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate(&ParametricObjectSpec::new(Category::Mug, 1), 50).unwrap();
        let b = generate(&ParametricObjectSpec::new(Category::Mug, 2), 50).unwrap();
        assert_ne!(a.object, b.object);
    }

    #[test]
    fn out_of_range_parameter_is_named() {
        let spec = ParametricObjectSpec::new(Category::Mug, 0).with("cup_radius", 0.5);
        match generate(&spec, 10) {
            Err(Error::ParameterOutOfRange { name, .. }) => assert_eq!(name, "cup_radius"),
            other => panic!("{other:?}"),
        }
        let spec = ParametricObjectSpec::new(Category::Rack, 0).with("peg_height", 0.4).with("trunk_height", 0.25);
        match generate(&spec, 10) {
            Err(Error::ParameterOutOfRange { name, .. }) => assert_eq!(name, "peg_height"),
            other => panic!("{other:?}"),
        }
        let spec = ParametricObjectSpec::new(Category::Bowl, 0).with("lip", 0.1);
        assert!(matches!(generate(&spec, 10), Err(Error::UnknownParameter(_))));
    }

    #[test]
    fn correspondence_round_trip() {
        let g = generate(&ParametricObjectSpec::new(Category::Teapot, 3), 150).unwrap();
        for (name, coords) in &g.correspondences {
            let cloud = &g.object.parts[name];
            let index = NeighborIndex::new(&cloud.points);
            for (i, c) in coords.iter().enumerate() {
                let p = g.point_at(name, c).unwrap();
                assert_eq!(index.nearest(&p).unwrap().0, i);
            }
        }
    }

    #[test]
    fn sdf_bounded_by_distance_to_samples() {
        let g = generate(&ParametricObjectSpec::new(Category::Mug, 4), 400).unwrap();
        let cloud = g.object.merged();
        let index = NeighborIndex::new(&cloud.points);
        // generous sampling resolution: twice the mean nearest-neighbor spacing
        let spacing: f64 = cloud
            .points
            .iter()
            .map(|p| index.knn(p, 2)[1].1)
            .sum::<f64>()
            / cloud.len() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let uni = rand::distr::Uniform::new(-0.08, 0.12).unwrap();
        for _ in 0..500 {
            let p = Point3::new(uni.sample(&mut rng), uni.sample(&mut rng), uni.sample(&mut rng));
            let d = index.nearest(&p).unwrap().1.sqrt();
            assert!(g.sdf.sdf(&p).abs() <= d + 4.0 * spacing);
        }
    }

    #[test]
    fn family_is_smooth_in_parameters() {
        for cat in Category::ALL {
            let base = ParametricObjectSpec::new(cat, 11);
            let a = generate(&base, 300).unwrap().object.merged();
            let extent = a.extent();
            for r in cat.parameters() {
                let v = if r.default == 0.0 { 0.01 * (r.max - r.min) } else { 1.01 * r.default };
                let spec = base.clone().with(r.name, v.min(r.max));
                if spec.validate().is_err() {
                    continue;
                }
                let b = generate(&spec, 300).unwrap().object.merged();
                let d = symmetric_chamfer(&a, &b).unwrap();
                assert!(d.sqrt() < 0.05 * extent, "{cat} {}", r.name);
            }
        }
    }

    #[test]
    fn parts_are_disjoint_beyond_contact() {
        // most of each part lies strictly outside the other parts
        for cat in Category::ALL {
            let g = generate(&ParametricObjectSpec::new(cat, 5), 300).unwrap();
            for (name, cloud) in &g.object.parts {
                for (other, prim) in &g.sdf.parts {
                    if other == name {
                        continue;
                    }
                    let inside = cloud.points.iter().filter(|p| prim.sdf(p) < -1e-3).count();
                    assert!(inside * 4 < cloud.len(), "{cat}: {name} inside {other}: {inside}");
                }
            }
        }
    }

    #[test]
    fn peg_frame_points_along_direction() {
        let spec = ParametricObjectSpec::new(Category::Rack, 0);
        let peg = RackPeg::of(&spec);
        let tip = peg.frame().apply(&Point3::new(0.0, 0.0, peg.total_length()));
        assert!((tip - peg.tip()).norm() < 1e-12);
    }

    #[test]
    fn jitter_moves_points() {
        let g = generate(&ParametricObjectSpec::new(Category::Bowl, 0), 20).unwrap();
        let j = jitter(&g.object, 0.001, 1).unwrap();
        assert_ne!(j, g.object);
        assert_eq!(jitter(&g.object, 0.0, 1).unwrap(), g.object);
    }
}
