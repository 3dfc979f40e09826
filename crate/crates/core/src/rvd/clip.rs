use std::collections::VecDeque;

use rayon::prelude::*;

use super::Boundary;
use crate::geom::{polygon_area, Vec3};
use crate::mesh::TriangleMesh;
use crate::scalar::Real;
use crate::spatial::PointIndex;

const INITIAL_NEIGHBORS: usize = 24;

/// A clipped piece of one base face, before it is attached to a cell.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Piece<T> {
    pub owner: usize,
    pub ring: Vec<Vec3<T>>,
    pub labels: Vec<Boundary>,
}

/// Clips `ring` to the half-space of points at least as close to `xi` as to
/// `xj`. Edges created on the bisector are labeled `Site(j)`.
///
/// Returns `None` when nothing of positive size remains. When no vertex lies
/// strictly outside the half-space the input is returned untouched.
pub(crate) fn clip_halfspace<T: Real>(
    ring: &[Vec3<T>],
    labels: &[Boundary],
    xi: Vec3<T>,
    xj: Vec3<T>,
    j: usize,
    eps2: T,
) -> Option<(Vec<Vec3<T>>, Vec<Boundary>)> {
    let d = xj - xi;
    let m = (xi + xj) * T::half();
    let side: Vec<T> = ring.iter().map(|&p| (p - m).dot(d)).collect();
    if side.iter().all(|&s| s <= T::zero()) {
        return Some((ring.to_vec(), labels.to_vec()));
    }
    if side.iter().all(|&s| s > T::zero()) {
        return None;
    }
    let n = ring.len();
    let mut out_ring = Vec::with_capacity(n + 2);
    let mut out_labels = Vec::with_capacity(n + 2);
    for k in 0..n {
        let k1 = (k + 1) % n;
        let (a, b) = (ring[k], ring[k1]);
        let (sa, sb) = (side[k], side[k1]);
        let a_in = sa <= T::zero();
        let b_in = sb <= T::zero();
        match (a_in, b_in) {
            (true, true) => {
                out_ring.push(a);
                out_labels.push(labels[k]);
            }
            (true, false) => {
                out_ring.push(a);
                out_labels.push(labels[k]);
                let t = sa / (sa - sb);
                out_ring.push(a + (b - a) * t);
                out_labels.push(Boundary::Site(j));
            }
            (false, true) => {
                let t = sb / (sb - sa);
                out_ring.push(b + (a - b) * t);
                out_labels.push(labels[k]);
            }
            (false, false) => {}
        }
    }
    cleanup(out_ring, out_labels, eps2)
}

/// Drops consecutive coincident vertices and rejects rings without area.
pub(crate) fn cleanup<T: Real>(
    mut ring: Vec<Vec3<T>>,
    mut labels: Vec<Boundary>,
    eps2: T,
) -> Option<(Vec<Vec3<T>>, Vec<Boundary>)> {
    let mut k = 0;
    while ring.len() >= 2 && k < ring.len() {
        let next = (k + 1) % ring.len();
        if ring[k].dist2(ring[next]) <= eps2 {
            // The edge k -> next has no length; keep `next` and its outgoing label.
            ring.remove(k);
            labels.remove(k);
        } else {
            k += 1;
        }
    }
    if ring.len() < 3 || polygon_area(&ring) <= eps2 {
        return None;
    }
    Some((ring, labels))
}

/// Restricted Voronoi clipping of every base face against a point set.
pub(crate) struct Clipper<'a, T> {
    points: &'a [Vec3<T>],
    index: PointIndex<T>,
    neighbors: Vec<Vec<(usize, T)>>,
    eps2: T,
}

impl<'a, T: Real> Clipper<'a, T> {
    pub fn new(points: &'a [Vec3<T>], eps: T) -> Self {
        let index = PointIndex::new(points.to_vec());
        let k = INITIAL_NEIGHBORS.min(points.len());
        let neighbors = points.par_iter().map(|&p| index.k_nearest(p, k)).collect();
        Self {
            points,
            index,
            neighbors,
            eps2: eps * eps,
        }
    }

    /// Pieces of every face, indexed by face. Degenerate faces get none.
    pub fn clip_mesh(&self, mesh: &TriangleMesh<T>) -> Vec<Vec<Piece<T>>> {
        if self.points.is_empty() {
            return vec![Vec::new(); mesh.num_faces()];
        }
        (0..mesh.num_faces())
            .into_par_iter()
            .map(|f| {
                if mesh.is_degenerate(f) {
                    Vec::new()
                } else {
                    self.clip_face(mesh.triangle(f))
                }
            })
            .collect()
    }

    /// Flood fill over sites starting from the owner of the face centroid.
    pub fn clip_face(&self, tri: [Vec3<T>; 3]) -> Vec<Piece<T>> {
        let centroid = (tri[0] + tri[1] + tri[2]) / T::lit(3.0);
        let Ok((start, _)) = self.index.nearest_d2(centroid) else {
            return Vec::new();
        };
        let mut visited = vec![start];
        let mut queue = VecDeque::from([start]);
        let mut pieces = Vec::new();
        while let Some(i) = queue.pop_front() {
            if let Some((ring, labels)) = self.clip_site(i, &tri) {
                for l in &labels {
                    if let Boundary::Site(j) = *l {
                        if !visited.contains(&j) {
                            visited.push(j);
                            queue.push_back(j);
                        }
                    }
                }
                pieces.push(Piece { owner: i, ring, labels });
            }
        }
        pieces.sort_by_key(|p| p.owner);
        pieces
    }

    /// The part of `tri` inside the Voronoi cell of site `i`.
    fn clip_site(&self, i: usize, tri: &[Vec3<T>; 3]) -> Option<(Vec<Vec3<T>>, Vec<Boundary>)> {
        let xi = self.points[i];
        let mut ring = tri.to_vec();
        let mut labels = vec![Boundary::Face(0), Boundary::Face(1), Boundary::Face(2)];
        let radius2 = |ring: &[Vec3<T>]| ring.iter().fold(T::zero(), |r, p| r.max(p.dist2(xi)));
        let mut r2 = radius2(&ring);

        let mut list = std::borrow::Cow::Borrowed(&self.neighbors[i]);
        let mut pos = 0;
        loop {
            if pos == list.len() {
                if list.len() >= self.points.len() {
                    break;
                }
                let k = (list.len() * 2).min(self.points.len());
                list = std::borrow::Cow::Owned(self.index.k_nearest(xi, k));
                continue;
            }
            let (j, d2) = list[pos];
            pos += 1;
            if j == i {
                continue;
            }
            // Sites beyond twice the security radius cannot cut the polygon.
            if d2 >= T::lit(4.0) * r2 {
                break;
            }
            if d2 == T::zero() {
                // Coincident sites: the lower index takes the region.
                if j < i {
                    return None;
                }
                continue;
            }
            let (nr, nl) = clip_halfspace(&ring, &labels, xi, self.points[j], j, self.eps2)?;
            if nr != ring {
                r2 = radius2(&nr);
            }
            ring = nr;
            labels = nl;
        }
        Some((ring, labels))
    }
}
