#![allow(dead_code)]

use cwf_core::geom::Vec3;
use cwf_core::mesh::TriangleMesh;
use cwf_core::rvd::{CellPolygon, Decomposition, SiteSet};
use cwf_core::spatial::sample_surface;

pub fn random_sites(mesh: &TriangleMesh<f64>, n: usize, seed: u64) -> SiteSet<f64> {
    SiteSet::new(sample_surface(mesh, n, seed).into_iter().map(|s| s.point).collect())
}

/// Signed slack of `p` against the edges of a convex polygon: non-negative inside.
pub fn inside_margin(poly: &CellPolygon<f64>, p: Vec3<f64>) -> f64 {
    let n = poly.ring.len();
    (0..n)
        .map(|k| {
            let a = poly.ring[k];
            let b = poly.ring[(k + 1) % n];
            let e = b - a;
            e.cross(p - a).dot(poly.normal) / e.norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Owner of the polygon in `face` that contains `p`, preferring the largest margin.
pub fn owner_at(d: &Decomposition<f64>, face: usize, p: Vec3<f64>) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (owner, poly) in d.polygons() {
        if poly.face != face {
            continue;
        }
        let m = inside_margin(poly, p);
        if best.is_none_or(|(bm, _)| m > bm) {
            best = Some((m, owner));
        }
    }
    best.filter(|&(m, _)| m > -1e-9).map(|(_, o)| o)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
