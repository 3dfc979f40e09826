use crate::geom::{closest_point_on_triangle, Aabb, Vec3};
use crate::mesh::TriangleMesh;
use crate::scalar::Real;

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
struct Node<T> {
    bbox: Aabb<T>,
    /// Children for interior nodes, `None` for leaves.
    children: Option<(usize, usize)>,
    start: usize,
    end: usize,
}

/// Bounding-volume hierarchy over the faces of a mesh for closest-point queries.
///
/// Owns a copy of the triangle corners, so it can outlive the mesh borrow.
#[derive(Clone, Debug)]
pub struct SurfaceIndex<T> {
    triangles: Vec<[Vec3<T>; 3]>,
    normals: Vec<Vec3<T>>,
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

/// Result of a closest-point query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint<T> {
    pub point: Vec3<T>,
    pub face: usize,
    pub dist2: T,
}

impl<T: Real> SurfaceIndex<T> {
    pub fn new(mesh: &TriangleMesh<T>) -> Self {
        let triangles: Vec<[Vec3<T>; 3]> = (0..mesh.num_faces()).map(|f| mesh.triangle(f)).collect();
        let centroids: Vec<Vec3<T>> = triangles
            .iter()
            .map(|t| (t[0] + t[1] + t[2]) / T::lit(3.0))
            .collect();
        let mut order: Vec<usize> = (0..triangles.len()).collect();
        let mut nodes = Vec::new();
        let n = order.len();
        Self::build(&triangles, &centroids, &mut order, 0, n, &mut nodes);
        Self {
            triangles,
            normals: mesh.face_normals().to_vec(),
            order,
            nodes,
        }
    }

    fn build(
        tris: &[[Vec3<T>; 3]],
        centroids: &[Vec3<T>],
        order: &mut [usize],
        start: usize,
        end: usize,
        nodes: &mut Vec<Node<T>>,
    ) -> usize {
        let bbox = Aabb::from_points(order[start..end].iter().flat_map(|&f| tris[f].iter()));
        let id = nodes.len();
        nodes.push(Node { bbox, children: None, start, end });
        if end - start > LEAF_SIZE {
            let cb = Aabb::from_points(order[start..end].iter().map(|&f| &centroids[f]));
            let axis = cb.longest_axis();
            let mid = (start + end) / 2;
            order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                centroids[a][axis]
                    .partial_cmp(&centroids[b][axis])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            let l = Self::build(tris, centroids, order, start, mid, nodes);
            let r = Self::build(tris, centroids, order, mid, end, nodes);
            nodes[id].children = Some((l, r));
        }
        id
    }

    pub fn face_normal(&self, f: usize) -> Vec3<T> {
        self.normals[f]
    }

    /// Globally closest point on the surface; ties go to the lowest face id.
    pub fn closest_point(&self, q: Vec3<T>) -> SurfacePoint<T> {
        let mut best = SurfacePoint {
            point: q,
            face: usize::MAX,
            dist2: T::infinity(),
        };
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.bbox.dist2(q) > best.dist2 {
                continue;
            }
            match node.children {
                None => {
                    for &f in &self.order[node.start..node.end] {
                        let [a, b, c] = self.triangles[f];
                        let (p, _) = closest_point_on_triangle(q, a, b, c);
                        let d2 = p.dist2(q);
                        if d2 < best.dist2 || (d2 == best.dist2 && f < best.face) {
                            best = SurfacePoint { point: p, face: f, dist2: d2 };
                        }
                    }
                }
                Some((l, r)) => {
                    let (dl, dr) = (self.nodes[l].bbox.dist2(q), self.nodes[r].bbox.dist2(q));
                    if dl <= dr {
                        stack.push(r);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(r);
                    }
                }
            }
        }
        best
    }
}
