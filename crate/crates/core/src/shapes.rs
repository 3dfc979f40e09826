//! Procedural meshes: boxes, planes, spheres and a few shapes used for
//! testing feature-sensitive behavior.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geom::Vec3;
use crate::mesh::TriangleMesh;
use crate::scalar::Real;

/// Closed axis-aligned box `[0, size]` with each face split into a
/// `divisions` grid of quads (two triangles each), outward winding.
pub fn box_mesh<T: Real>(size: [f64; 3], divisions: [usize; 3]) -> TriangleMesh<T> {
    let n = divisions;
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices: Vec<Vec3<T>> = Vec::new();
    let mut faces = Vec::new();
    let mut vid = |lat: [usize; 3], vertices: &mut Vec<Vec3<T>>| -> usize {
        *index.entry(lat).or_insert_with(|| {
            vertices.push(Vec3::from_f64([
                size[0] * lat[0] as f64 / n[0] as f64,
                size[1] * lat[1] as f64 / n[1] as f64,
                size[2] * lat[2] as f64 / n[2] as f64,
            ]));
            vertices.len() - 1
        })
    };
    // (fixed axis, side, u axis, v axis) with u × v pointing outward.
    let sides = [
        (0, 0, 2, 1),
        (0, 1, 1, 2),
        (1, 0, 0, 2),
        (1, 1, 2, 0),
        (2, 0, 1, 0),
        (2, 1, 0, 1),
    ];
    for (axis, side, ua, va) in sides {
        for i in 0..n[ua] {
            for j in 0..n[va] {
                let lat = |du: usize, dv: usize| {
                    let mut l = [0usize; 3];
                    l[axis] = side * n[axis];
                    l[ua] = i + du;
                    l[va] = j + dv;
                    l
                };
                let a = vid(lat(0, 0), &mut vertices);
                let b = vid(lat(1, 0), &mut vertices);
                let c = vid(lat(1, 1), &mut vertices);
                let d = vid(lat(0, 1), &mut vertices);
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            }
        }
    }
    TriangleMesh::new(vertices, faces).expect("box mesh is valid")
}

/// Unit cube `[0, 1]^3` with `n × n` quads per face (`12 n²` triangles).
pub fn cube<T: Real>(n: usize) -> TriangleMesh<T> {
    box_mesh([1.0; 3], [n; 3])
}

/// Open unit square `[0, 1]^2` at `z = 0`, normal `+z`, `2 n²` triangles.
pub fn flat_square<T: Real>(n: usize) -> TriangleMesh<T> {
    let mut vertices = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Vec3::from_f64([i as f64 / n as f64, j as f64 / n as f64, 0.0]));
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut faces = Vec::new();
    for j in 0..n {
        for i in 0..n {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriangleMesh::new(vertices, faces).expect("square mesh is valid")
}

/// The triangle (0,0,0), (1,0,0), (0,1,0).
pub fn single_triangle<T: Real>() -> TriangleMesh<T> {
    TriangleMesh::new(
        vec![
            Vec3::from_f64([0.0, 0.0, 0.0]),
            Vec3::from_f64([1.0, 0.0, 0.0]),
            Vec3::from_f64([0.0, 1.0, 0.0]),
        ],
        vec![[0, 1, 2]],
    )
    .expect("triangle is valid")
}

/// Unit-radius icosphere centered at the origin, `20 · 4^subdivisions` faces.
pub fn icosphere<T: Real>(subdivisions: usize) -> TriangleMesh<T> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<[f64; 3]> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let norm = |p: [f64; 3]| {
        let l = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        [p[0] / l, p[1] / l, p[2] / l]
    };
    for v in verts.iter_mut() {
        *v = norm(*v);
    }
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(norm([(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0]));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(verts.into_iter().map(Vec3::from_f64).collect(), faces)
        .expect("icosphere is valid")
}

/// Icosphere with a smooth radial bump field `1 + amplitude · sin(3x) sin(3y) sin(3z)`.
pub fn bumpy_sphere<T: Real>(subdivisions: usize, amplitude: f64) -> TriangleMesh<T> {
    let base = icosphere::<f64>(subdivisions);
    let verts = base
        .vertices()
        .iter()
        .map(|p| {
            let r = 1.0 + amplitude * (3.0 * p.x).sin() * (3.0 * p.y).sin() * (3.0 * p.z).sin();
            Vec3::from_f64([p.x * r, p.y * r, p.z * r])
        })
        .collect();
    TriangleMesh::new(verts, base.faces().to_vec()).expect("bumpy sphere is valid")
}

/// Unit cube with the edge along `x = 1, y = 1` replaced by a planar chamfer
/// of leg length `width`. Faces are coarse fans of the convex polygons.
pub fn chamfered_cube<T: Real>(width: f64) -> TriangleMesh<T> {
    let w = 1.0 - width;
    let p: Vec<[f64; 3]> = vec![
        [0.0, 0.0, 0.0], // 0
        [1.0, 0.0, 0.0], // 1
        [1.0, w, 0.0],   // 2
        [w, 1.0, 0.0],   // 3
        [0.0, 1.0, 0.0], // 4
        [0.0, 0.0, 1.0], // 5
        [1.0, 0.0, 1.0], // 6
        [1.0, w, 1.0],   // 7
        [w, 1.0, 1.0],   // 8
        [0.0, 1.0, 1.0], // 9
    ];
    let polys: Vec<Vec<usize>> = vec![
        vec![0, 4, 3, 2, 1], // bottom, -z
        vec![5, 6, 7, 8, 9], // top, +z
        vec![0, 1, 6, 5],    // -y
        vec![1, 2, 7, 6],    // +x
        vec![2, 3, 8, 7],    // chamfer
        vec![3, 4, 9, 8],    // +y
        vec![4, 0, 5, 9],    // -x
    ];
    let mut faces = Vec::new();
    for poly in &polys {
        for k in 1..poly.len() - 1 {
            faces.push([poly[0], poly[k], poly[k + 1]]);
        }
    }
    let mesh = TriangleMesh::new(p.into_iter().map(Vec3::from_f64).collect(), faces)
        .expect("chamfered cube is valid");
    subdivide(&mesh, 3)
}

/// Splits every triangle into four, `levels` times. Positions are kept
/// piecewise linear, so the geometry is unchanged.
pub fn subdivide<T: Real>(mesh: &TriangleMesh<T>, levels: usize) -> TriangleMesh<T> {
    let mut verts = mesh.vertices().to_vec();
    let mut faces = mesh.faces().to_vec();
    for _ in 0..levels {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3<T>>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push((verts[a] + verts[b]) * T::half());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(verts, faces).expect("subdivision preserves validity")
}

/// Adds isotropic Gaussian noise with standard deviation
/// `fraction · bbox_diagonal` to every vertex.
pub fn with_vertex_noise<T: Real>(mesh: &TriangleMesh<T>, fraction: f64, seed: u64) -> TriangleMesh<T> {
    let sigma = fraction * mesh.bbox_diagonal().as_f64();
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let verts = mesh
        .vertices()
        .iter()
        .map(|p| {
            let d = [normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)];
            *p + Vec3::from_f64(d)
        })
        .collect();
    TriangleMesh::new(verts, mesh.faces().to_vec()).expect("noise keeps connectivity valid")
}
