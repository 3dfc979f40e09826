//! Dual triangulation of a decomposition and triangle quality.
//!
//! Polygon vertices are welded across cells; every welded point touched by
//! three or more cells is a corner and yields one triangle per fan slot.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geom::Vec3;
use crate::mesh::{ManifoldReport, NormalizationTransform, TriangleMesh};
use crate::rvd::{Decomposition, SiteSet};
use crate::scalar::Real;

/// The simplified surface: one vertex per non-empty site.
#[derive(Clone, Debug, PartialEq)]
pub struct DualMesh<T> {
    pub vertices: Vec<Vec3<T>>,
    pub triangles: Vec<[usize; 3]>,
    /// Site index of every vertex.
    pub sites: Vec<usize>,
    /// Corners where exactly three cells meet.
    pub corners3: usize,
    /// Corners with four or more cells, fan triangulated.
    pub corners4: usize,
}

impl<T: Real> DualMesh<T> {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Indexed mesh in the frame given by `xf.inverse`. Fails on an empty dual.
    pub fn to_mesh(&self, xf: &NormalizationTransform<T>) -> Result<TriangleMesh<T>> {
        TriangleMesh::new(
            self.vertices.iter().map(|&p| xf.inverse(p)).collect(),
            self.triangles.clone(),
        )
    }

    pub fn manifold_report(&self) -> ManifoldReport {
        match TriangleMesh::new(self.vertices.clone(), self.triangles.clone()) {
            Ok(m) => m.manifold_report(),
            Err(_) => ManifoldReport::default(),
        }
    }
}

struct Corner<T> {
    cells: Vec<usize>,
    point: Vec3<T>,
    normal: Vec3<T>,
    /// Centroid of the incident polygon of each entry of `cells`.
    anchors: Vec<Vec3<T>>,
}

/// Welded point with, per incident cell, the area-weighted normal and polygon centroid.
type Welded<T> = (Vec3<T>, BTreeMap<usize, (Vec3<T>, Vec3<T>)>);

fn weld_key<T: Real>(p: Vec3<T>, h: T) -> [i64; 3] {
    let k = |v: T| (v / h).round().to_i64().unwrap_or(i64::MAX);
    [k(p.x), k(p.y), k(p.z)]
}

/// Groups polygon vertices that lie within the decomposition tolerance.
fn corners<T: Real>(d: &Decomposition<T>) -> Vec<Corner<T>> {
    let h = d.tolerance() * T::lit(4.0);
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut points: Vec<Welded<T>> = Vec::new();
    for (owner, poly) in d.polygons() {
        let centroid = crate::geom::polygon_centroid(&poly.ring);
        for &v in &poly.ring {
            let key = weld_key(v, h);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(ids) = grid.get(&[key[0] + dx, key[1] + dy, key[2] + dz]) {
                            if let Some(&id) = ids.iter().find(|&&id| points[id].0.dist(v) <= h) {
                                found = Some(id);
                                break 'search;
                            }
                        }
                    }
                }
            }
            let id = found.unwrap_or_else(|| {
                grid.entry(key).or_default().push(points.len());
                points.push((v, BTreeMap::new()));
                points.len() - 1
            });
            let entry = points[id].1.entry(owner).or_insert((Vec3::zero(), centroid));
            entry.0 += poly.normal * poly.area;
        }
    }
    points
        .into_iter()
        .filter(|(_, cells)| cells.len() >= 3)
        .map(|(point, cells)| {
            let normal = cells.values().fold(Vec3::zero(), |acc, (n, _)| acc + *n);
            Corner {
                cells: cells.keys().copied().collect(),
                anchors: cells.values().map(|&(_, c)| c).collect(),
                point,
                normal,
            }
        })
        .collect()
}

/// Cells of a corner in counter-clockwise order around `normal`, rotated to
/// start at the lowest site index.
fn ring_order<T: Real>(c: &Corner<T>) -> Vec<usize> {
    let n = c.normal.normalized();
    let seed = c.anchors[0] - c.point;
    let u = (seed - n * seed.dot(n)).normalized();
    let v = n.cross(u);
    let mut order: Vec<(T, usize)> = c
        .cells
        .iter()
        .zip(&c.anchors)
        .map(|(&cell, &a)| {
            let r = a - c.point;
            (r.dot(v).atan2(r.dot(u)), cell)
        })
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    let cells: Vec<usize> = order.into_iter().map(|(_, c)| c).collect();
    let start = cells.iter().enumerate().min_by_key(|&(_, &c)| c).map_or(0, |(k, _)| k);
    cells[start..].iter().chain(&cells[..start]).copied().collect()
}

/// Triangle per three-cell corner, fans at higher-degree corners, each
/// oriented to agree with the base surface under the corner.
pub fn extract_dual<T: Real>(d: &Decomposition<T>, sites: &SiteSet<T>) -> DualMesh<T> {
    let mut index = vec![usize::MAX; sites.len()];
    let mut vertices = Vec::new();
    let mut vertex_sites = Vec::new();
    for cell in &d.cells {
        index[cell.owner] = vertices.len();
        vertices.push(sites.positions[cell.owner]);
        vertex_sites.push(cell.owner);
    }

    let mut triangles = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let (mut corners3, mut corners4) = (0, 0);
    for c in corners(d) {
        let ring = if c.cells.len() == 3 {
            corners3 += 1;
            c.cells.clone()
        } else {
            corners4 += 1;
            ring_order(&c)
        };
        for k in 1..ring.len() - 1 {
            let mut t = [index[ring[0]], index[ring[k]], index[ring[k + 1]]];
            let [a, b, e] = t.map(|i| vertices[i]);
            if (b - a).cross(e - a).dot(c.normal) < T::zero() {
                t.swap(1, 2);
            }
            let mut key = t;
            key.sort_unstable();
            if seen.insert(key) {
                triangles.push(t);
            }
        }
    }
    if triangles.is_empty() {
        log::warn!("dual mesh is empty: no corner joins three cells");
    }
    DualMesh {
        vertices,
        triangles,
        sites: vertex_sites,
        corners3,
        corners4,
    }
}

/// `(6 / sqrt 3) * area / (half_perimeter * longest_edge)`: 1 for equilateral
/// triangles, 0 for degenerate ones.
pub fn triangle_q<T: Real>(a: Vec3<T>, b: Vec3<T>, c: Vec3<T>) -> T {
    let l2 = [a.dist2(b), b.dist2(c), c.dist2(a)];
    let h2 = l2[0].max(l2[1]).max(l2[2]);
    // Products under one root so that exact inputs give exact results.
    let den: T = l2.iter().map(|&x| (x * h2).sqrt()).sum::<T>() * T::half();
    let num = (T::lit(3.0) * (b - a).cross(c - a).norm2()).sqrt();
    if den > T::zero() {
        num / den
    } else {
        T::zero()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport<T> {
    pub triangle_q_min: T,
    pub triangle_q_mean: T,
    pub triangles: usize,
    pub open_b: usize,
    pub nmv: usize,
}

/// Triangle quality statistics and manifold defects; an empty mesh reports zeros.
pub fn quality_report<T: Real>(vertices: &[Vec3<T>], triangles: &[[usize; 3]]) -> QualityReport<T> {
    let q: Vec<T> = triangles
        .iter()
        .map(|t| triangle_q(vertices[t[0]], vertices[t[1]], vertices[t[2]]))
        .collect();
    let manifold = TriangleMesh::new(vertices.to_vec(), triangles.to_vec())
        .map(|m| m.manifold_report())
        .unwrap_or_default();
    let (min, mean) = if q.is_empty() {
        (T::zero(), T::zero())
    } else {
        let mut sorted = q.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        (sorted[0], sorted.iter().copied().sum::<T>() / T::from_usize_lossy(q.len()))
    };
    QualityReport {
        triangle_q_min: min,
        triangle_q_mean: mean,
        triangles: q.len(),
        open_b: manifold.open_b,
        nmv: manifold.nmv,
    }
}

pub fn mesh_quality<T: Real>(mesh: &TriangleMesh<T>) -> QualityReport<T> {
    quality_report(mesh.vertices(), mesh.faces())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilateral_is_exactly_one() {
        let v = |x, y, z| Vec3::new(x, y, z);
        assert_eq!(triangle_q(v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), v(0.0, 0.0, 1.0)), 1.0);
        assert_eq!(triangle_q(v(2.0, 0.0, 0.0), v(0.0, 2.0, 0.0), v(0.0, 0.0, 2.0)), 1.0);
        assert_eq!(triangle_q(v(1.0f32, 0.0, 0.0), v(0.0, 1.0, 0.0), v(0.0, 0.0, 1.0)), 1.0);
    }

    #[test]
    fn degenerate_and_right_triangles() {
        let v = |x, y| Vec3::new(x, y, 0.0);
        assert_eq!(triangle_q(v(0.0, 0.0), v(1.0, 0.0), v(3.0, 0.0)), 0.0);
        assert_eq!(triangle_q(v(0.0, 0.0), v(0.0, 0.0), v(0.0, 0.0)), 0.0);
        let s3 = 3f64.sqrt();
        let q = triangle_q(v(0.0, 0.0), v(1.0, 0.0), v(0.0, s3));
        // Area sqrt3/2, half-perimeter (3 + sqrt3)/2, longest edge 2.
        let oracle = (6.0 / s3) * (s3 / 2.0) / ((3.0 + s3) / 2.0 * 2.0);
        assert!((q - oracle).abs() < 1e-15 && (q - 0.634).abs() < 1e-3, "{q}");
    }
}
