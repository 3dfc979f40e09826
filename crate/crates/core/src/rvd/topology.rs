use std::collections::{BTreeMap, BTreeSet};

use super::{Boundary, Decomposition};
use crate::geom::Vec3;
use crate::mesh::{edge_key, EdgeKey};
use crate::scalar::Real;

/// True when segments `ab` and `cd` are collinear within `tol` and share a
/// stretch longer than `tol`.
pub(crate) fn segments_overlap<T: Real>(a: Vec3<T>, b: Vec3<T>, c: Vec3<T>, d: Vec3<T>, tol: T) -> bool {
    let ab = b - a;
    let len = ab.norm();
    if len <= tol {
        return false;
    }
    let u = ab / len;
    let off_line = |p: Vec3<T>| {
        let w = p - a;
        (w - u * w.dot(u)).norm()
    };
    if off_line(c) > tol || off_line(d) > tol {
        return false;
    }
    let (tc, td) = ((c - a).dot(u), (d - a).dot(u));
    let lo = tc.min(td).max(T::zero());
    let hi = tc.max(td).min(len);
    hi - lo > tol
}

/// Mesh edge under side `k` of face `f`.
pub(crate) fn face_side(faces: &[[usize; 3]], f: usize, k: u8) -> EdgeKey {
    let v = faces[f];
    let k = k as usize;
    edge_key(v[k], v[(k + 1) % 3])
}

/// Pairs of polygons, by their global position in `d.polygons()`, that
/// share a boundary stretch of positive length, either inside one base
/// face or across a base edge.
pub(crate) fn polygon_contacts<T: Real>(d: &Decomposition<T>) -> Vec<(usize, usize)> {
    let polys: Vec<_> = d.polygons().map(|(_, p)| p).collect();
    let tol = d.tolerance();
    let mut by_face: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut by_edge: BTreeMap<EdgeKey, Vec<(usize, usize)>> = BTreeMap::new();
    for (id, p) in polys.iter().enumerate() {
        by_face.entry(p.face).or_default().push(id);
        for (k, l) in p.labels.iter().enumerate() {
            if let Boundary::Face(side) = *l {
                by_edge
                    .entry(face_side(d.base_faces(), p.face, side))
                    .or_default()
                    .push((id, k));
            }
        }
    }
    let edge = |id: usize, k: usize| {
        let r = &polys[id].ring;
        (r[k], r[(k + 1) % r.len()])
    };
    let mut out = BTreeSet::new();
    for ids in by_face.values() {
        for (x, &a) in ids.iter().enumerate() {
            for &b in &ids[x + 1..] {
                let touching = (0..polys[a].ring.len()).any(|ka| {
                    let (p, q) = edge(a, ka);
                    (0..polys[b].ring.len()).any(|kb| {
                        let (r, s) = edge(b, kb);
                        segments_overlap(p, q, r, s, tol)
                    })
                });
                if touching {
                    out.insert((a, b));
                }
            }
        }
    }
    for list in by_edge.values() {
        for (x, &(a, ka)) in list.iter().enumerate() {
            for &(b, kb) in &list[x + 1..] {
                if polys[a].face == polys[b].face {
                    continue;
                }
                let (p, q) = edge(a, ka);
                let (r, s) = edge(b, kb);
                if segments_overlap(p, q, r, s, tol) {
                    out.insert((a.min(b), a.max(b)));
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Site pairs `(i, j)` with `i < j` whose cells share a boundary of positive length.
pub fn cell_adjacency<T: Real>(d: &Decomposition<T>) -> Vec<(usize, usize)> {
    let owners: Vec<usize> = d.polygons().map(|(o, _)| o).collect();
    let pairs: BTreeSet<(usize, usize)> = polygon_contacts(d)
        .into_iter()
        .filter_map(|(a, b)| {
            let (i, j) = (owners[a], owners[b]);
            (i != j).then(|| (i.min(j), i.max(j)))
        })
        .collect();
    pairs.into_iter().collect()
}

/// Number of connected components of each cell, aligned with `d.cells`.
pub fn cell_components<T: Real>(d: &Decomposition<T>) -> Vec<usize> {
    let owners: Vec<usize> = d.polygons().map(|(o, _)| o).collect();
    let mut parent: Vec<usize> = (0..owners.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (a, b) in polygon_contacts(d) {
        if owners[a] == owners[b] {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut counts = Vec::with_capacity(d.cells.len());
    let mut start = 0;
    for cell in &d.cells {
        let end = start + cell.polygons.len();
        let roots: BTreeSet<usize> = (start..end).map(|x| find(&mut parent, x)).collect();
        counts.push(roots.len());
        start = end;
    }
    counts
}

/// Owners of cells made of more than one connected component.
pub fn multi_component_cells<T: Real>(d: &Decomposition<T>) -> Vec<usize> {
    d.cells
        .iter()
        .zip(cell_components(d))
        .filter(|(_, n)| *n > 1)
        .map(|(c, _)| c.owner)
        .collect()
}
