use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::objects::{Category, ParametricObjectSpec};
use crate::error::{Error, Result};

/// A distribution over parameter vectors for each category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Small variations around the defaults; training objects come from here.
    Training,
    /// Same distribution as training, used for held-out test objects.
    Control,
    /// Racks whose peg height varies by ±30% of the trunk height.
    RaisedPeg,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Training => "training",
            Family::Control => "control",
            Family::RaisedPeg => "raised_peg",
        }
    }

    /// Uniform sampling range of `name` for `category` in this family.
    pub fn range(self, category: Category, name: &str) -> (f64, f64) {
        if self == Family::RaisedPeg && category == Category::Rack {
            match name {
                "trunk_height" => return (0.31, 0.33),
                "peg_height" => return (0.11, 0.29),
                _ => {}
            }
        }
        match (category, name) {
            (Category::Mug, "cup_radius") => (0.035, 0.045),
            (Category::Mug, "cup_height") => (0.085, 0.1),
            (Category::Mug, "handle_radius") => (0.027, 0.032),
            (Category::Mug, "handle_thickness") => (0.004, 0.005),
            (Category::Mug, "handle_height_offset") => (-0.005, 0.005),
            (Category::Rack, "trunk_height") => (0.28, 0.32),
            (Category::Rack, "peg_length") => (0.09, 0.11),
            (Category::Rack, "peg_height") => (0.19, 0.21),
            (Category::Rack, "peg_angle") => (0.25, 0.35),
            (Category::Bowl, "bowl_bottom_radius") => (0.03, 0.04),
            (Category::Bowl, "bowl_top_radius") => (0.065, 0.075),
            (Category::Bowl, "bowl_height") => (0.045, 0.055),
            (Category::Teapot, "body_radius") => (0.055, 0.065),
            (Category::Teapot, "body_height") => (0.085, 0.095),
            (Category::Teapot, "spout_length") => (0.075, 0.085),
            (Category::Teapot, "spout_angle") => (0.55, 0.65),
            (Category::Teapot, "handle_radius") => (0.028, 0.032),
            (Category::Teapot, "handle_thickness") => (0.0055, 0.0065),
            (Category::Teapot, "lid_radius") => (0.028, 0.032),
            _ => {
                let r = category.parameter(name).expect("parameter of category");
                (r.default, r.default)
            }
        }
    }

    /// Draws one spec of `category`; the object's sampling seed is drawn too.
    pub fn sample<R: Rng>(self, category: Category, rng: &mut R) -> ParametricObjectSpec {
        let mut spec = ParametricObjectSpec::new(category, rng.random());
        for r in category.parameters() {
            let (lo, hi) = self.range(category, r.name);
            let v = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            spec.parameters.insert(r.name.to_string(), v);
        }
        spec
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Family::Training, Family::Control, Family::RaisedPeg]
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown family `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_are_valid_and_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for fam in [Family::Training, Family::Control, Family::RaisedPeg] {
            for cat in Category::ALL {
                for _ in 0..500 {
                    let s = fam.sample(cat, &mut rng);
                    s.validate().unwrap();
                    for (k, v) in &s.parameters {
                        let (lo, hi) = fam.range(cat, k);
                        assert!(*v >= lo && *v <= hi);
                    }
                }
            }
        }
    }

    #[test]
    fn raised_peg_spans_thirty_percent_of_trunk() {
        let (lo, hi) = Family::RaisedPeg.range(Category::Rack, "peg_height");
        assert!(((hi - lo) / 2.0 - 0.3 * 0.3).abs() < 1e-12);
        assert_eq!(Family::RaisedPeg.range(Category::Mug, "cup_radius"), Family::Training.range(Category::Mug, "cup_radius"));
    }
}
