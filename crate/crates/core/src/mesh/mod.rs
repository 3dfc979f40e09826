//! Indexed triangle surface: the fixed base geometry every other stage reads.
//!
//! A [`TriangleMesh`] is immutable once built. Normals, areas and edge
//! adjacency are computed at construction. Open and non-manifold inputs are
//! accepted as-is; [`TriangleMesh::manifold_report`] counts their defects.

mod io;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use io::{load_mesh, read_obj, read_ply, write_mesh, write_obj, write_ply};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::scalar::Real;

/// Undirected edge key, always stored as `(min, max)`.
pub type EdgeKey = (usize, usize);

#[inline]
pub fn edge_key(a: usize, b: usize) -> EdgeKey {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Clone, Debug)]
pub struct TriangleMesh<T> {
    vertices: Vec<Vec3<T>>,
    faces: Vec<[usize; 3]>,
    face_normals: Vec<Vec3<T>>,
    face_areas: Vec<T>,
    edge_faces: BTreeMap<EdgeKey, Vec<usize>>,
    total_area: T,
    degenerate_faces: Vec<usize>,
}

/// Counts of topological defects.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifoldReport {
    /// Undirected edges with exactly one incident face.
    pub open_b: usize,
    /// Vertices whose incident faces do not form a single disk or half-disk.
    pub nmv: usize,
}

impl<T: Real> TriangleMesh<T> {
    /// Builds a mesh, computing per-face normals, areas and edge adjacency.
    ///
    /// Faces with out-of-range or repeated indices are rejected. Zero-area
    /// faces are kept but get a zero normal and are listed in
    /// [`degenerate_faces`](Self::degenerate_faces).
    pub fn new(vertices: Vec<Vec3<T>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let nv = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidFace {
                    face: fi,
                    reason: format!("index out of range for {nv} vertices"),
                });
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidFace {
                    face: fi,
                    reason: "repeated vertex".into(),
                });
            }
        }

        let mut face_normals = Vec::with_capacity(faces.len());
        let mut face_areas = Vec::with_capacity(faces.len());
        let mut degenerate_faces = Vec::new();
        let mut edge_faces: BTreeMap<EdgeKey, Vec<usize>> = BTreeMap::new();
        for (fi, f) in faces.iter().enumerate() {
            let [a, b, c] = [vertices[f[0]], vertices[f[1]], vertices[f[2]]];
            let n = (b - a).cross(c - a);
            let len = n.norm();
            let area = len * T::half();
            if area > T::zero() && len.is_finite() {
                face_normals.push(n / len);
            } else {
                face_normals.push(Vec3::zero());
                degenerate_faces.push(fi);
            }
            face_areas.push(area);
            for k in 0..3 {
                edge_faces
                    .entry(edge_key(f[k], f[(k + 1) % 3]))
                    .or_default()
                    .push(fi);
            }
        }
        let total_area = face_areas.iter().copied().sum();
        Ok(Self {
            vertices,
            faces,
            face_normals,
            face_areas,
            edge_faces,
            total_area,
            degenerate_faces,
        })
    }

    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_normals(&self) -> &[Vec3<T>] {
        &self.face_normals
    }

    pub fn face_areas(&self) -> &[T] {
        &self.face_areas
    }

    pub fn total_area(&self) -> T {
        self.total_area
    }

    /// Undirected edge → incident faces, in ascending face order.
    pub fn edge_adjacency(&self) -> &BTreeMap<EdgeKey, Vec<usize>> {
        &self.edge_faces
    }

    pub fn degenerate_faces(&self) -> &[usize] {
        &self.degenerate_faces
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    #[inline]
    pub fn triangle(&self, f: usize) -> [Vec3<T>; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    #[inline]
    pub fn is_degenerate(&self, f: usize) -> bool {
        self.face_areas[f] <= T::zero() || self.face_normals[f] == Vec3::zero()
    }

    /// Faces incident to edge `(a, b)`, or an empty slice for a non-edge.
    pub fn faces_of_edge(&self, a: usize, b: usize) -> &[usize] {
        self.edge_faces
            .get(&edge_key(a, b))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn bbox(&self) -> Aabb<T> {
        Aabb::from_points(&self.vertices)
    }

    pub fn bbox_diagonal(&self) -> T {
        self.bbox().diagonal()
    }

    /// Incident faces per vertex, ascending.
    pub fn vertex_faces(&self) -> Vec<Vec<usize>> {
        let mut vf = vec![Vec::new(); self.vertices.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                vf[v].push(fi);
            }
        }
        vf
    }

    /// Returns a new mesh with `map` applied to every vertex.
    pub fn map_vertices(&self, map: impl Fn(Vec3<T>) -> Vec3<T>) -> Result<Self> {
        Self::new(
            self.vertices.iter().map(|&p| map(p)).collect(),
            self.faces.clone(),
        )
    }

    /// Rescales and recenters the mesh to unit total area.
    ///
    /// The returned transform maps normalized coordinates back to the input frame.
    pub fn normalize_area(&self) -> Result<(Self, NormalizationTransform<T>)> {
        if !(self.total_area > T::zero()) || !self.total_area.is_finite() {
            return Err(Error::DegenerateMesh);
        }
        let xf = NormalizationTransform {
            scale: T::one() / self.total_area.sqrt(),
            translation: self.bbox().center(),
        };
        Ok((self.map_vertices(|p| xf.forward(p))?, xf))
    }

    /// Counts open edges and non-manifold vertices.
    pub fn manifold_report(&self) -> ManifoldReport {
        let open_b = self.edge_faces.values().filter(|fs| fs.len() == 1).count();
        let vf = self.vertex_faces();
        let nmv = (0..self.vertices.len())
            .filter(|&v| !vf[v].is_empty() && !self.vertex_fan_is_disk(v, &vf[v]))
            .count();
        ManifoldReport { open_b, nmv }
    }

    /// True when the faces around `v` form one edge-connected fan and no edge
    /// through `v` carries more than two faces.
    fn vertex_fan_is_disk(&self, v: usize, incident: &[usize]) -> bool {
        let mut parent: Vec<usize> = (0..incident.len()).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let local = |f: usize| incident.iter().position(|&g| g == f);
        for &f in incident {
            for &w in &self.faces[f] {
                if w == v {
                    continue;
                }
                let around = self.faces_of_edge(v, w);
                if around.len() > 2 {
                    return false;
                }
                if around.len() == 2 {
                    let (a, b) = (local(around[0]).unwrap(), local(around[1]).unwrap());
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    parent[ra] = rb;
                }
            }
        }
        let root = find(&mut parent, 0);
        (1..incident.len()).all(|i| find(&mut parent, i) == root)
    }

    /// Edges whose dihedral angle exceeds `angle_deg`, as `(a, b)` vertex pairs.
    ///
    /// Only edges with exactly two non-degenerate incident faces are considered.
    pub fn feature_edges(&self, angle_deg: T) -> Vec<EdgeKey> {
        let cos_thresh = angle_deg.to_radians().cos();
        self.edge_faces
            .iter()
            .filter(|(_, fs)| {
                fs.len() == 2
                    && !self.is_degenerate(fs[0])
                    && !self.is_degenerate(fs[1])
                    && self.face_normals[fs[0]].dot(self.face_normals[fs[1]]) < cos_thresh
            })
            .map(|(e, _)| *e)
            .collect()
    }
}

/// Similarity transform between input and unit-area coordinates.
///
/// `forward(p) = (p - translation) * scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTransform<T> {
    pub scale: T,
    pub translation: Vec3<T>,
}

impl<T: Real> NormalizationTransform<T> {
    pub fn identity() -> Self {
        Self {
            scale: T::one(),
            translation: Vec3::zero(),
        }
    }

    #[inline]
    pub fn forward(&self, p: Vec3<T>) -> Vec3<T> {
        (p - self.translation) * self.scale
    }

    #[inline]
    pub fn inverse(&self, p: Vec3<T>) -> Vec3<T> {
        p / self.scale + self.translation
    }

    /// Maps a length measured in normalized units back to input units.
    pub fn inverse_length(&self, l: T) -> T {
        l / self.scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn cube_area_and_closed() {
        let m = shapes::cube::<f64>(4);
        assert!((m.total_area() - 6.0).abs() < 1e-12);
        assert_eq!(m.manifold_report(), ManifoldReport { open_b: 0, nmv: 0 });
    }

    #[test]
    fn single_triangle_report() {
        let m = shapes::single_triangle::<f64>();
        assert_eq!(m.manifold_report(), ManifoldReport { open_b: 3, nmv: 0 });
    }

    #[test]
    fn bowtie_has_one_nonmanifold_vertex() {
        // Brute-force fan analysis: the shared vertex has two separate face
        // components, every other vertex sees a single face.
        let v = |x: f64, y: f64| Vec3::new(x, y, 0.0);
        let m = TriangleMesh::new(
            vec![v(0., 0.), v(1., 0.), v(0., 1.), v(-1., 0.), v(0., -1.)],
            vec![[0, 1, 2], [0, 3, 4]],
        )
        .unwrap();
        assert_eq!(m.manifold_report(), ManifoldReport { open_b: 6, nmv: 1 });
    }

    #[test]
    fn edge_with_three_faces_is_nonmanifold() {
        let v = |x: f64, y: f64, z: f64| Vec3::new(x, y, z);
        let m = TriangleMesh::new(
            vec![v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.), v(0., -1., 0.), v(0., 0., 1.)],
            vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]],
        )
        .unwrap();
        let r = m.manifold_report();
        assert_eq!(r.nmv, 2);
        assert_eq!(m.faces_of_edge(0, 1).len(), 3);
    }

    #[test]
    fn rejects_repeated_and_out_of_range() {
        let v = Vec3::<f64>::zero();
        assert!(matches!(
            TriangleMesh::new(vec![v; 3], vec![[0, 0, 1]]),
            Err(Error::InvalidFace { .. })
        ));
        assert!(matches!(
            TriangleMesh::new(vec![v; 3], vec![[0, 1, 3]]),
            Err(Error::InvalidFace { .. })
        ));
        assert!(matches!(
            TriangleMesh::<f64>::new(vec![v; 3], vec![]),
            Err(Error::EmptyMesh)
        ));
    }

    #[test]
    fn degenerate_face_flagged_with_zero_normal() {
        let v = |x: f64| Vec3::new(x, 0.0, 0.0);
        let m = TriangleMesh::new(vec![v(0.), v(1.), v(2.)], vec![[0, 1, 2]]).unwrap();
        assert_eq!(m.degenerate_faces(), &[0]);
        assert_eq!(m.face_normals()[0], Vec3::zero());
        assert!(matches!(m.normalize_area(), Err(Error::DegenerateMesh)));
    }

    #[test]
    fn normalization_scales() {
        let cube = shapes::cube::<f64>(2);
        let (n, xf) = cube.normalize_area().unwrap();
        assert!((xf.scale - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((n.total_area() - 1.0).abs() < 1e-9);

        let tri = shapes::single_triangle::<f64>();
        let (n, xf) = tri.normalize_area().unwrap();
        assert!((xf.scale - 2f64.sqrt()).abs() < 1e-12);
        assert!((n.total_area() - 1.0).abs() < 1e-9);

        let (again, xf2) = n.normalize_area().unwrap();
        assert!((xf2.scale - 1.0).abs() < 1e-12);
        assert!((again.total_area() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn normals_perpendicular_to_edges() {
        let m = shapes::icosphere::<f64>(2);
        for f in 0..m.num_faces() {
            let [a, b, c] = m.triangle(f);
            let n = m.face_normals()[f];
            assert!((n.norm() - 1.0).abs() < 1e-12);
            assert!(n.dot(b - a).abs() <= 1e-9 * (b - a).norm());
            assert!(n.dot(c - a).abs() <= 1e-9 * (c - a).norm());
        }
        let sum: f64 = m.face_areas().iter().sum();
        assert!((sum - m.total_area()).abs() <= 1e-9 * sum);
    }

    #[test]
    fn cube_feature_edges() {
        let m = shapes::cube::<f64>(3);
        let fe = m.feature_edges(30.0);
        // 12 cube edges, each split into 3 mesh edges.
        assert_eq!(fe.len(), 36);
        assert!(shapes::icosphere::<f64>(3).feature_edges(30.0).is_empty());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn transform_round_trip(x in -1e3f64..1e3, y in -1e3f64..1e3, z in -1e3f64..1e3,
                                    s in 1e-3f64..1e3) {
                let xf = NormalizationTransform { scale: s, translation: Vec3::new(0.3, -2.0, 7.5) };
                let p = Vec3::new(x, y, z);
                let q = xf.inverse(xf.forward(p));
                prop_assert!(q.dist(p) <= 1e-12 * (1.0 + p.norm()));
            }
        }
    }
}
