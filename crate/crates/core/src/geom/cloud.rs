use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Point3, Vec3};
use crate::error::{Error, Result};

/// Per-point binary labels, one column per label key.
///
/// Keys are relation names (`"adj:handle"`) or the world-axis key [`Z_KEY`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSet {
    columns: BTreeMap<String, Vec<bool>>,
}

/// Label key marking points below the mean height of their part.
pub const Z_KEY: &str = "z";

/// Label key for adjacency with part `other`.
pub fn adjacency_key(other: &str) -> String {
    format!("adj:{other}")
}

impl LabelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.columns.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&[bool]> {
        self.columns.get(key).map(Vec::as_slice)
    }

    pub fn insert(&mut self, key: impl Into<String>, values: Vec<bool>) {
        self.columns.insert(key.into(), values);
    }

    pub fn remove(&mut self, key: &str) -> Option<Vec<bool>> {
        self.columns.remove(key)
    }

    fn select(&self, idx: &[usize]) -> LabelSet {
        LabelSet {
            columns: self
                .columns
                .iter()
                .map(|(k, v)| (k.clone(), idx.iter().map(|&i| v[i]).collect()))
                .collect(),
        }
    }
}

/// Ordered 3D points with optional per-point labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CloudWire", into = "CloudWire")]
pub struct PointCloud {
    pub points: Vec<Point3>,
    labels: LabelSet,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self {
            points,
            labels: LabelSet::new(),
        }
    }

    pub fn with_labels(points: Vec<Point3>, labels: LabelSet) -> Result<Self> {
        let mut cloud = Self::new(points);
        cloud.set_labels(labels)?;
        Ok(cloud)
    }

    pub fn from_slice(points: &[[f64; 3]]) -> Self {
        Self::new(points.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn label(&self, key: &str) -> Result<&[bool]> {
        self.labels
            .get(key)
            .ok_or_else(|| Error::MissingLabel(key.to_string()))
    }

    pub fn set_labels(&mut self, labels: LabelSet) -> Result<()> {
        for (key, column) in &labels.columns {
            if column.len() != self.points.len() {
                return Err(Error::LabelLength {
                    key: key.clone(),
                    expected: self.points.len(),
                    got: column.len(),
                });
            }
        }
        self.labels = labels;
        Ok(())
    }

    pub fn set_label(&mut self, key: impl Into<String>, values: Vec<bool>) -> Result<()> {
        let key = key.into();
        if values.len() != self.points.len() {
            return Err(Error::LabelLength {
                key,
                expected: self.points.len(),
                got: values.len(),
            });
        }
        self.labels.insert(key, values);
        Ok(())
    }

    pub fn clear_labels(&mut self) {
        self.labels = LabelSet::new();
    }

    /// Same points with labels replaced by a copy of `other`'s labels.
    pub fn relabeled_like(&self, other: &PointCloud) -> Result<PointCloud> {
        PointCloud::with_labels(self.points.clone(), other.labels.clone())
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::NonFinite(i));
            }
        }
        Ok(())
    }

    pub fn ensure_non_empty(&self) -> Result<()> {
        if self.points.is_empty() {
            Err(Error::EmptyCloud)
        } else {
            Ok(())
        }
    }

    /// Subset of points (with their labels) at the given indices, in order.
    pub fn select(&self, idx: &[usize]) -> PointCloud {
        PointCloud {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            labels: self.labels.select(idx),
        }
    }

    /// Concatenates clouds; only label keys present on every input survive.
    pub fn concat<'a>(clouds: impl IntoIterator<Item = &'a PointCloud>) -> PointCloud {
        let clouds: Vec<&PointCloud> = clouds.into_iter().collect();
        let mut points = Vec::new();
        for c in &clouds {
            points.extend_from_slice(&c.points);
        }
        let mut labels = LabelSet::new();
        if let Some(first) = clouds.first() {
            for key in first.labels.keys() {
                if clouds.iter().all(|c| c.labels.contains(key)) {
                    let column = clouds
                        .iter()
                        .flat_map(|c| c.labels.get(key).unwrap().iter().copied())
                        .collect();
                    labels.insert(key, column);
                }
            }
        }
        PointCloud { points, labels }
    }

    pub fn centroid(&self) -> Point3 {
        let n = self.points.len().max(1) as f64;
        let sum = self
            .points
            .iter()
            .fold(Vec3::zeros(), |acc, p| acc + p.coords);
        Point3::from(sum / n)
    }

    /// Axis-aligned bounds as (min, max).
    pub fn bounds(&self) -> (Point3, Point3) {
        bounds_of(&self.points)
    }

    /// Length of the bounding-box diagonal; the repo-wide notion of "extent".
    pub fn extent(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (hi - lo).norm()
    }

    /// Evenly strided subset of at most `max_points` points.
    pub fn downsample(&self, max_points: usize) -> PointCloud {
        if self.len() <= max_points || max_points == 0 {
            return self.clone();
        }
        let idx: Vec<usize> = (0..max_points)
            .map(|k| k * self.len() / max_points)
            .collect();
        self.select(&idx)
    }
}

pub fn bounds_of(points: &[Point3]) -> (Point3, Point3) {
    let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (lo, hi)
}

/// Bounding-box diagonal of the union of several point sets.
pub fn joint_extent<'a>(sets: impl IntoIterator<Item = &'a [Point3]>) -> f64 {
    let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for s in sets {
        let (l, h) = bounds_of(s);
        for a in 0..3 {
            lo[a] = lo[a].min(l[a]);
            hi[a] = hi[a].max(h[a]);
        }
    }
    (hi - lo).norm()
}

#[derive(Serialize, Deserialize)]
struct CloudWire {
    points: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    labels: BTreeMap<String, Vec<u8>>,
}

impl From<PointCloud> for CloudWire {
    fn from(c: PointCloud) -> Self {
        CloudWire {
            points: c.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            labels: c
                .labels
                .columns
                .into_iter()
                .map(|(k, v)| (k, v.into_iter().map(u8::from).collect()))
                .collect(),
        }
    }
}

impl TryFrom<CloudWire> for PointCloud {
    type Error = Error;

    fn try_from(w: CloudWire) -> Result<Self> {
        let points = w
            .points
            .iter()
            .map(|p| Point3::new(p[0], p[1], p[2]))
            .collect();
        let mut labels = LabelSet::new();
        for (key, column) in w.labels {
            let mut values = Vec::with_capacity(column.len());
            for v in column {
                match v {
                    0 => values.push(false),
                    1 => values.push(true),
                    other => {
                        return Err(Error::Invalid(format!(
                            "label `{key}` has non-binary value {other}"
                        )))
                    }
                }
            }
            labels.insert(key, values);
        }
        let cloud = PointCloud::with_labels(points, labels)?;
        cloud.validate()?;
        Ok(cloud)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let mut c = PointCloud::from_slice(&[[0.0, 1.0, 2.0], [0.1, 0.2, 0.3]]);
        c.set_label("z", vec![true, false]).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(
            s,
            r#"{"points":[[0.0,1.0,2.0],[0.1,0.2,0.3]],"labels":{"z":[1,0]}}"#
        );
        let back: PointCloud = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unlabeled_json_omits_labels() {
        let c = PointCloud::from_slice(&[[1.0, 2.0, 3.0]]);
        assert_eq!(serde_json::to_string(&c).unwrap(), r#"{"points":[[1.0,2.0,3.0]]}"#);
    }

    #[test]
    fn rejects_bad_labels() {
        let bad_len = r#"{"points":[[0,0,0]],"labels":{"z":[1,0]}}"#;
        assert!(serde_json::from_str::<PointCloud>(bad_len).is_err());
        let non_binary = r#"{"points":[[0,0,0]],"labels":{"z":[2]}}"#;
        assert!(serde_json::from_str::<PointCloud>(non_binary).is_err());
    }

    #[test]
    fn full_precision_round_trip() {
        let c = PointCloud::from_slice(&[[0.1 + 0.2, std::f64::consts::PI, -1e-300]]);
        let back: PointCloud = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back.points[0], c.points[0]);
    }

    #[test]
    fn concat_keeps_shared_keys() {
        let mut a = PointCloud::from_slice(&[[0.0, 0.0, 0.0]]);
        a.set_label("z", vec![true]).unwrap();
        a.set_label("adj:x", vec![false]).unwrap();
        let mut b = PointCloud::from_slice(&[[1.0, 0.0, 0.0]]);
        b.set_label("z", vec![false]).unwrap();
        let c = PointCloud::concat([&a, &b]);
        assert_eq!(c.len(), 2);
        assert_eq!(c.label("z").unwrap(), &[true, false]);
        assert!(c.label("adj:x").is_err());
    }

    #[test]
    fn extent_and_downsample() {
        let c = PointCloud::from_slice(&[[0.0, 0.0, 0.0], [3.0, 4.0, 0.0], [1.0, 1.0, 0.0]]);
        assert!((c.extent() - 5.0).abs() < 1e-15);
        assert_eq!(c.downsample(2).len(), 2);
        assert_eq!(c.downsample(10).len(), 3);
    }
}
