/// Compass (pattern) search state for one local minimization.
///
/// Each sweep polls `x ± step·scale` along every coordinate and accepts the
/// first improvement; a sweep without improvement halves `scale`.
/// Coordinates with a zero step are held fixed.
#[derive(Debug, Clone)]
pub struct PatternSearch {
    pub x: Vec<f64>,
    pub value: f64,
    pub scale: f64,
    pub evals: usize,
    steps: Vec<f64>,
}

impl PatternSearch {
    pub fn new(x0: Vec<f64>, steps: Vec<f64>, f: &mut impl FnMut(&[f64]) -> f64) -> Self {
        let value = sanitize(f(&x0));
        PatternSearch {
            x: x0,
            value,
            scale: 1.0,
            evals: 1,
            steps,
        }
    }

    /// Runs until `scale < min_scale` (returns true) or the eval budget is spent.
    pub fn run(&mut self, f: &mut impl FnMut(&[f64]) -> f64, min_scale: f64, max_evals: usize) -> bool {
        let mut trial = self.x.clone();
        while self.scale >= min_scale {
            if self.evals >= max_evals {
                return false;
            }
            let mut improved = false;
            'dims: for i in 0..self.x.len() {
                if self.steps[i] == 0.0 {
                    continue;
                }
                for sign in [1.0, -1.0] {
                    if self.evals >= max_evals {
                        return false;
                    }
                    trial.copy_from_slice(&self.x);
                    trial[i] += sign * self.steps[i] * self.scale;
                    let v = sanitize(f(&trial));
                    self.evals += 1;
                    if v < self.value {
                        self.x.copy_from_slice(&trial);
                        self.value = v;
                        improved = true;
                        continue 'dims;
                    }
                }
            }
            if !improved {
                self.scale *= 0.5;
            }
        }
        true
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}
