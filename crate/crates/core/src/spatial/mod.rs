//! Nearest-neighbor queries over point sets, closest-point queries over the
//! base surface, and area-uniform surface sampling.

mod bvh;
mod kdtree;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use bvh::{SurfaceIndex, SurfacePoint};
pub use kdtree::PointIndex;

use crate::geom::Vec3;
use crate::mesh::{EdgeKey, TriangleMesh};
use crate::scalar::Real;

/// A point sampled on a surface, with the normal of the face it came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceSample<T> {
    pub point: Vec3<T>,
    pub normal: Vec3<T>,
    pub face: usize,
}

/// Inverse-CDF table over non-negative weights.
struct Cdf {
    cumulative: Vec<f64>,
}

impl Cdf {
    fn new(weights: impl Iterator<Item = f64>) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .map(|w| {
                acc += w.max(0.0);
                acc
            })
            .collect();
        Self { cumulative }
    }

    fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    fn pick(&self, u: f64) -> usize {
        let target = u * self.total();
        // First entry whose cumulative weight exceeds the target, which never
        // lands on a zero-weight entry.
        let i = self.cumulative.partition_point(|&c| c <= target);
        i.min(self.cumulative.len() - 1)
    }
}

/// Draws `count` points uniformly by area: a face is chosen with probability
/// proportional to its area, then a uniform barycentric point inside it.
///
/// Deterministic for a fixed `seed`.
pub fn sample_surface<T: Real>(mesh: &TriangleMesh<T>, count: usize, seed: u64) -> Vec<SurfaceSample<T>> {
    let cdf = Cdf::new(mesh.face_areas().iter().map(|a| a.as_f64()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let f = cdf.pick(rng.gen::<f64>());
            let [a, b, c] = mesh.triangle(f);
            let s = rng.gen::<f64>().sqrt();
            let r2 = rng.gen::<f64>();
            let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
            let point = a * T::lit(wa) + b * T::lit(wb) + c * T::lit(wc);
            SurfaceSample {
                point,
                normal: mesh.face_normals()[f],
                face: f,
            }
        })
        .collect()
}

/// Draws `count` points uniformly by length along the given edges.
pub fn sample_edges<T: Real>(mesh: &TriangleMesh<T>, edges: &[EdgeKey], count: usize, seed: u64) -> Vec<Vec3<T>> {
    if edges.is_empty() {
        return Vec::new();
    }
    let v = mesh.vertices();
    let cdf = Cdf::new(edges.iter().map(|&(a, b)| v[a].dist(v[b]).as_f64()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let (a, b) = edges[cdf.pick(rng.gen::<f64>())];
            v[a].lerp(v[b], T::lit(rng.gen::<f64>()))
        })
        .collect()
}
