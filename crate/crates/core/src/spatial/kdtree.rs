use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::scalar::Real;

const LEAF_SIZE: usize = 8;

#[derive(Clone, Debug)]
enum Node<T> {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: T, left: usize, right: usize },
}

/// Static kd-tree answering exact Euclidean nearest-neighbor queries.
///
/// Among equidistant points the lowest index is returned.
#[derive(Clone, Debug)]
pub struct PointIndex<T> {
    points: Vec<Vec3<T>>,
    perm: Vec<usize>,
    nodes: Vec<Node<T>>,
}

/// `(d2, index)` ordering used for tie-breaking.
#[inline]
fn better<T: Real>(d2: T, idx: usize, best_d2: T, best_idx: usize) -> bool {
    d2 < best_d2 || (d2 == best_d2 && idx < best_idx)
}

impl<T: Real> PointIndex<T> {
    pub fn new(points: Vec<Vec3<T>>) -> Self {
        let mut perm: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        if !points.is_empty() {
            let n = perm.len();
            Self::build(&points, &mut perm, 0, n, &mut nodes);
        }
        Self { points, perm, nodes }
    }

    fn build(pts: &[Vec3<T>], perm: &mut [usize], start: usize, end: usize, nodes: &mut Vec<Node<T>>) -> usize {
        let id = nodes.len();
        if end - start <= LEAF_SIZE {
            nodes.push(Node::Leaf { start, end });
            return id;
        }
        let bb = Aabb::from_points(perm[start..end].iter().map(|&i| &pts[i]));
        let axis = bb.longest_axis();
        let mid = (start + end) / 2;
        perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a][axis]
                .partial_cmp(&pts[b][axis])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let value = pts[perm[mid]][axis];
        nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = Self::build(pts, perm, start, mid, nodes);
        let right = Self::build(pts, perm, mid, end, nodes);
        nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3<T>] {
        &self.points
    }

    /// Exact nearest stored point to `q`: `(index, distance)`.
    pub fn nearest(&self, q: Vec3<T>) -> Result<(usize, T)> {
        let (i, d2) = self.nearest_d2(q)?;
        Ok((i, d2.sqrt()))
    }

    /// Like [`nearest`](Self::nearest) but returns the squared distance.
    pub fn nearest_d2(&self, q: Vec3<T>) -> Result<(usize, T)> {
        if self.points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let mut best = (usize::MAX, T::infinity());
        let mut stack = vec![(0usize, T::zero())];
        while let Some((node, bound)) = stack.pop() {
            if bound > best.1 {
                continue;
            }
            match self.nodes[node] {
                Node::Leaf { start, end } => {
                    for &i in &self.perm[start..end] {
                        let d2 = self.points[i].dist2(q);
                        if better(d2, i, best.1, best.0) {
                            best = (i, d2);
                        }
                    }
                }
                Node::Split { axis, value, left, right } => {
                    let diff = q[axis] - value;
                    let (near, far) = if diff < T::zero() { (left, right) } else { (right, left) };
                    stack.push((far, diff * diff));
                    stack.push((near, T::zero()));
                }
            }
        }
        Ok(best)
    }

    /// The `k` nearest points as `(index, squared distance)`, sorted by
    /// distance then index.
    pub fn k_nearest(&self, q: Vec3<T>, k: usize) -> Vec<(usize, T)> {
        let mut out: Vec<(usize, T)> = Vec::with_capacity(k + 1);
        if k == 0 || self.points.is_empty() {
            return out;
        }
        let worst = |out: &Vec<(usize, T)>| {
            if out.len() < k {
                T::infinity()
            } else {
                out[out.len() - 1].1
            }
        };
        let mut stack = vec![(0usize, T::zero())];
        while let Some((node, bound)) = stack.pop() {
            if bound > worst(&out) {
                continue;
            }
            match self.nodes[node] {
                Node::Leaf { start, end } => {
                    for &i in &self.perm[start..end] {
                        let d2 = self.points[i].dist2(q);
                        if out.len() == k {
                            let (wi, wd) = out[k - 1];
                            if !better(d2, i, wd, wi) {
                                continue;
                            }
                            out.pop();
                        }
                        let pos = out
                            .iter()
                            .position(|&(j, dj)| better(d2, i, dj, j))
                            .unwrap_or(out.len());
                        out.insert(pos, (i, d2));
                    }
                }
                Node::Split { axis, value, left, right } => {
                    let diff = q[axis] - value;
                    let (near, far) = if diff < T::zero() { (left, right) } else { (right, left) };
                    stack.push((far, diff * diff));
                    stack.push((near, T::zero()));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Vec3<f64>], q: Vec3<f64>) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d2 = p.dist2(q);
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        best
    }

    fn random_points(n: usize, seed: u64) -> Vec<Vec3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect()
    }

    #[test]
    fn simple_queries() {
        let idx = PointIndex::new(vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)]);
        let (i, d): (usize, f64) = idx.nearest(Vec3::new(0.4, 0.0, 0.0)).unwrap();
        assert_eq!(i, 0);
        assert!((d - 0.4).abs() < 1e-15);
        assert_eq!(idx.nearest(Vec3::new(1.0, 0.0, 0.0)).unwrap(), (1, 0.0));
        assert!(matches!(PointIndex::<f64>::new(vec![]).nearest(Vec3::zero()), Err(Error::EmptyPointSet)));
    }

    #[test]
    fn matches_linear_scan() {
        let pts = random_points(1000, 1);
        let idx = PointIndex::new(pts.clone());
        for q in random_points(100, 2) {
            let (i, d2) = idx.nearest_d2(q).unwrap();
            assert_eq!((i, d2), brute(&pts, q));
        }
    }

    #[test]
    fn ties_pick_lowest_index() {
        // A lattice with many duplicates and equidistant candidates.
        let mut pts = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                pts.push(Vec3::new(i as f64, j as f64, 0.0));
            }
        }
        let dup = pts.clone();
        pts.extend(dup);
        let idx = PointIndex::new(pts.clone());
        for i in 0..5 {
            for j in 0..5 {
                let q = Vec3::new(i as f64 + 0.5, j as f64 + 0.5, 0.0);
                assert_eq!(idx.nearest_d2(q).unwrap(), brute(&pts, q));
            }
        }
    }

    #[test]
    fn k_nearest_sorted_and_exact() {
        let pts = random_points(500, 3);
        let idx = PointIndex::new(pts.clone());
        for q in random_points(20, 4) {
            let got = idx.k_nearest(q, 12);
            let mut all: Vec<(usize, f64)> = pts.iter().enumerate().map(|(i, p)| (i, p.dist2(q))).collect();
            all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            assert_eq!(got, all[..12].to_vec());
        }
        assert_eq!(idx.k_nearest(Vec3::zero(), 1000).len(), 500);
    }
}
