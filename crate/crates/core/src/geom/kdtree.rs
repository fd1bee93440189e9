use super::Point3;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Exact k-d tree over a fixed point set.
///
/// Results are ordered by `(distance, index)`, so equidistant points resolve
/// to the lowest index.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Vec<Point3>,
    order: Vec<usize>,
    /// `points` permuted by `order`, so leaves scan contiguous memory.
    sorted: Vec<Point3>,
    nodes: Vec<Node>,
}

impl NeighborIndex {
    pub fn new(points: &[Point3]) -> Self {
        let mut index = NeighborIndex {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            sorted: Vec::new(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            index.build(0, points.len());
        }
        index.sorted = index.order.iter().map(|&i| index.points[i]).collect();
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(self.points[i][a]);
                hi[a] = hi[a].max(self.points[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        if hi[axis] - lo[axis] <= 0.0 {
            // all coincident
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Split {
            axis,
            value,
            left: 0,
            right: 0,
        });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        if let Node::Split {
            left: l, right: r, ..
        } = &mut self.nodes[id]
        {
            *l = left;
            *r = right;
        }
        id
    }

    /// Nearest point as `(index, squared distance)`; `None` on an empty index.
    pub fn nearest(&self, q: &Point3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, usize::MAX);
        self.nearest_rec(0, q, &mut best);
        Some((best.1, best.0))
    }

    fn nearest_rec(&self, node: usize, q: &Point3, best: &mut (f64, usize)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for k in start..end {
                    let d2 = (self.sorted[k] - q).norm_squared();
                    if d2 < best.0 || (d2 == best.0 && self.order[k] < best.1) {
                        *best = (d2, self.order[k]);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, q, best);
                if diff * diff <= best.0 {
                    self.nearest_rec(far, q, best);
                }
            }
        }
    }

    /// The `min(k, len)` nearest points as `(index, euclidean distance)`.
    pub fn knn(&self, q: &Point3, k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        self.knn_rec(0, q, k, &mut heap);
        heap.into_iter().map(|(d2, i)| (i, d2.sqrt())).collect()
    }

    fn knn_rec(&self, node: usize, q: &Point3, k: usize, best: &mut Vec<(f64, usize)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = ((self.points[i] - q).norm_squared(), i);
                    if best.len() == k {
                        let worst = best[k - 1];
                        if !lex_less(cand, worst) {
                            continue;
                        }
                        best.pop();
                    }
                    let pos = best.partition_point(|&e| lex_less(e, cand));
                    best.insert(pos, cand);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near, q, k, best);
                if best.len() < k || diff * diff <= best[k - 1].0 {
                    self.knn_rec(far, q, k, best);
                }
            }
        }
    }

    /// All points within `radius` (inclusive) as `(index, squared distance)`, unordered.
    pub fn within(&self, q: &Point3, radius: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.within_rec(0, q, radius * radius, &mut out);
        }
        out
    }

    fn within_rec(&self, node: usize, q: &Point3, r2: f64, out: &mut Vec<(usize, f64)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = (self.points[i] - q).norm_squared();
                    if d2 <= r2 {
                        out.push((i, d2));
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.within_rec(near, q, r2, out);
                if diff * diff <= r2 {
                    self.within_rec(far, q, r2, out);
                }
            }
        }
    }
}

fn lex_less(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exhaustive(points: &[Point3], q: &Point3, k: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| ((p - q).norm_squared(), i))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.truncate(k);
        all.into_iter().map(|(d2, i)| (i, d2.sqrt())).collect()
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
        (0..n)
            .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
            .collect()
    }

    #[test]
    fn simple_query() {
        let idx = NeighborIndex::new(&[Point3::origin(), Point3::new(2.0, 0.0, 0.0)]);
        assert_eq!(idx.knn(&Point3::new(0.5, 0.0, 0.0), 1), vec![(0, 0.5)]);
        assert_eq!(idx.knn(&Point3::new(2.0, 0.0, 0.0), 1), vec![(1, 0.0)]);
    }

    #[test]
    fn ties_prefer_lowest_index() {
        let pts: Vec<Point3> = (0..40)
            .map(|i| Point3::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0, 0.0))
            .collect();
        let idx = NeighborIndex::new(&pts);
        let r = idx.knn(&Point3::origin(), 3);
        assert_eq!(r.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(idx.nearest(&Point3::origin()).unwrap().0, 0);
    }

    #[test]
    fn matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts = random_points(&mut rng, 500);
        let idx = NeighborIndex::new(&pts);
        for _ in 0..200 {
            let q = Point3::new(rng.random(), rng.random(), rng.random());
            assert_eq!(idx.knn(&q, 5), exhaustive(&pts, &q, 5));
            let (i, d2) = idx.nearest(&q).unwrap();
            let e = exhaustive(&pts, &q, 1)[0];
            assert_eq!(i, e.0);
            assert_eq!(d2.sqrt(), e.1);
        }
    }

    #[test]
    fn k_larger_than_cloud() {
        let idx = NeighborIndex::new(&[Point3::origin(), Point3::new(1.0, 0.0, 0.0)]);
        assert_eq!(idx.knn(&Point3::origin(), 10).len(), 2);
        assert!(NeighborIndex::new(&[]).nearest(&Point3::origin()).is_none());
    }

    #[test]
    fn duplicate_points() {
        let pts = vec![Point3::new(0.5, 0.5, 0.5); 30];
        let idx = NeighborIndex::new(&pts);
        assert_eq!(idx.nearest(&Point3::origin()).unwrap().0, 0);
        assert_eq!(idx.within(&Point3::origin(), 1.0).len(), 30);
    }

    #[test]
    fn radius_query_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = random_points(&mut rng, 300);
        let idx = NeighborIndex::new(&pts);
        let q = Point3::new(0.5, 0.5, 0.5);
        let mut got: Vec<usize> = idx.within(&q, 0.2).into_iter().map(|x| x.0).collect();
        got.sort();
        let want: Vec<usize> = (0..pts.len())
            .filter(|&i| (pts[i] - q).norm() <= 0.2)
            .collect();
        assert_eq!(got, want);
    }
}
