//! Second stage of the thin-plate repair.
//!
//! The first stage clips against the real sites `0..n` together with their
//! inward copies `n..2n`. Here every connected region won by an inward copy
//! is handed back to the real sites that bound it, split by their Voronoi
//! diagram, and edge labels that still name an inward copy are rewritten to
//! the real sites on the other side.

use std::collections::{BTreeMap, BTreeSet};

use super::clip::{cleanup, clip_halfspace, Piece};
use super::topology::{face_side, segments_overlap};
use super::{Boundary, RepairStats};
use crate::geom::{polygon_area, polygon_centroid, Vec3};
use crate::mesh::TriangleMesh;
use crate::scalar::Real;
use crate::spatial::PointIndex;

struct Region {
    members: Vec<(usize, usize)>,
    contributors: Vec<usize>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

pub(crate) fn repair<T: Real>(
    mesh: &TriangleMesh<T>,
    real: &[Vec3<T>],
    all: &[Vec3<T>],
    mut per_face: Vec<Vec<Piece<T>>>,
    tol: T,
) -> (Vec<Vec<Piece<T>>>, RepairStats) {
    let n = real.len();
    let eps2 = tol * tol;
    let mut stats = RepairStats::default();

    // Biased pieces, keyed by (owner, face). An owner has at most one piece per face.
    let mut biased: Vec<(usize, usize)> = Vec::new();
    let mut slot: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (f, pieces) in per_face.iter().enumerate() {
        for (k, p) in pieces.iter().enumerate() {
            if p.owner >= n {
                slot.insert((p.owner, f), biased.len());
                biased.push((f, k));
            }
        }
    }
    stats.biased_polygons = biased.len();
    let needs_relabel = per_face
        .iter()
        .flatten()
        .any(|p| p.labels.iter().any(|l| matches!(l, Boundary::Site(j) if *j >= n)));
    if biased.is_empty() && !needs_relabel {
        return (per_face, stats);
    }

    // Connected regions of each biased owner, joined across base edges.
    let mut parent: Vec<usize> = (0..biased.len()).collect();
    for (id, &(f, k)) in biased.iter().enumerate() {
        let piece = &per_face[f][k];
        let m = piece.ring.len();
        for (e, l) in piece.labels.iter().enumerate() {
            let Boundary::Face(side) = *l else { continue };
            let key = face_side(mesh.faces(), f, side);
            let (a, b) = (piece.ring[e], piece.ring[(e + 1) % m]);
            for &g in mesh.faces_of_edge(key.0, key.1) {
                let Some(&other) = (g != f).then(|| slot.get(&(piece.owner, g))).flatten() else {
                    continue;
                };
                let q = &per_face[g][biased[other].1];
                let qm = q.ring.len();
                let touches = q.labels.iter().enumerate().any(|(e2, l2)| match *l2 {
                    Boundary::Face(s2) if face_side(mesh.faces(), g, s2) == key => {
                        segments_overlap(a, b, q.ring[e2], q.ring[(e2 + 1) % qm], tol)
                    }
                    _ => false,
                });
                if touches {
                    let (ra, rb) = (find(&mut parent, id), find(&mut parent, other));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            }
        }
    }

    let mut regions: Vec<Region> = Vec::new();
    let mut region_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    let mut region_of_piece = vec![0usize; biased.len()];
    for id in 0..biased.len() {
        let root = find(&mut parent, id);
        let r = *region_of_root.entry(root).or_insert_with(|| {
            regions.push(Region {
                members: Vec::new(),
                contributors: Vec::new(),
            });
            regions.len() - 1
        });
        regions[r].members.push(biased[id]);
        region_of_piece[id] = r;
    }
    stats.biased_regions = regions.len();

    let real_index = PointIndex::new(real.to_vec());
    for region in &mut regions {
        let mut set = BTreeSet::new();
        for &(f, k) in &region.members {
            for l in &per_face[f][k].labels {
                if let Boundary::Site(j) = *l {
                    if j < n {
                        set.insert(j);
                    }
                }
            }
        }
        if set.is_empty() {
            let mut acc = Vec3::zero();
            let mut area = T::zero();
            for &(f, k) in &region.members {
                let ring = &per_face[f][k].ring;
                let a = polygon_area(ring);
                acc += polygon_centroid(ring) * a;
                area += a;
            }
            let c = if area > T::zero() { acc / area } else { per_face[region.members[0].0][region.members[0].1].ring[0] };
            let (site, _) = real_index.nearest_d2(c).expect("at least one real site");
            log::warn!("thin-plate region without a real contributor; assigned to nearest site {site}");
            set.insert(site);
            stats.fallback_regions += 1;
        }
        region.contributors = set.into_iter().collect();
    }

    // Re-partition each biased piece among its region's contributors.
    let mut fresh: Vec<Vec<Piece<T>>> = vec![Vec::new(); per_face.len()];
    for region in &regions {
        for &(f, k) in &region.members {
            let piece = &per_face[f][k];
            for &c in &region.contributors {
                if let Some((ring, labels)) = voronoi_part(&piece.ring, &piece.labels, c, &region.contributors, all, eps2) {
                    fresh[f].push(Piece { owner: c, ring, labels });
                }
            }
        }
    }
    for (f, pieces) in per_face.iter_mut().enumerate() {
        pieces.retain(|p| p.owner < n);
        pieces.append(&mut fresh[f]);
    }

    // Rewrite labels that still name a biased site.
    for (f, pieces) in per_face.iter_mut().enumerate() {
        for piece in pieces.iter_mut() {
            if !piece.labels.iter().any(|l| matches!(l, Boundary::Site(j) if *j >= n)) {
                continue;
            }
            let m = piece.ring.len();
            let mut ring = Vec::with_capacity(m + 2);
            let mut labels = Vec::with_capacity(m + 2);
            for e in 0..m {
                let (a, b) = (piece.ring[e], piece.ring[(e + 1) % m]);
                match piece.labels[e] {
                    Boundary::Site(j) if j >= n => {
                        let candidates = match slot.get(&(j, f)) {
                            Some(&id) => regions[region_of_piece[id]].contributors.clone(),
                            None => {
                                let mid = (a + b) * T::half();
                                vec![real_index.nearest_d2(mid).expect("at least one real site").0]
                            }
                        };
                        for (start, owner) in split_by_nearest(a, b, &candidates, all, tol) {
                            ring.push(start);
                            labels.push(Boundary::Site(owner));
                        }
                    }
                    l => {
                        ring.push(a);
                        labels.push(l);
                    }
                }
            }
            if let Some((r, l)) = cleanup(ring, labels, eps2) {
                piece.ring = r;
                piece.labels = l;
            }
        }
    }
    (per_face, stats)
}

/// Part of a convex ring closer to contributor `c` than to any other
/// contributor. Coincident contributors resolve to the lower index.
fn voronoi_part<T: Real>(
    ring: &[Vec3<T>],
    labels: &[Boundary],
    c: usize,
    contributors: &[usize],
    pts: &[Vec3<T>],
    eps2: T,
) -> Option<(Vec<Vec3<T>>, Vec<Boundary>)> {
    let mut ring = ring.to_vec();
    let mut labels = labels.to_vec();
    let xc = pts[c];
    for &o in contributors {
        if o == c {
            continue;
        }
        if pts[o] == xc {
            if o < c {
                return None;
            }
            continue;
        }
        let (r, l) = clip_halfspace(&ring, &labels, xc, pts[o], o, eps2)?;
        ring = r;
        labels = l;
    }
    Some((ring, labels))
}

/// Splits segment `ab` by the 1-D Voronoi diagram of `candidates`; returns the
/// start point and owner of each run, in order from `a`.
fn split_by_nearest<T: Real>(a: Vec3<T>, b: Vec3<T>, candidates: &[usize], pts: &[Vec3<T>], tol: T) -> Vec<(Vec3<T>, usize)> {
    let d = b - a;
    let len = d.norm();
    let owner_at = |t: T| {
        let y = a + d * t;
        let mut best = (T::infinity(), usize::MAX);
        for &c in candidates {
            let d2 = y.dist2(pts[c]);
            if d2 < best.0 || (d2 == best.0 && c < best.1) {
                best = (d2, c);
            }
        }
        best.1
    };
    let mut cuts: Vec<T> = Vec::new();
    for (x, &p) in candidates.iter().enumerate() {
        for &q in &candidates[x + 1..] {
            let slope = T::two() * d.dot(pts[q] - pts[p]);
            if slope == T::zero() {
                continue;
            }
            let at0 = T::two() * a.dot(pts[q] - pts[p]) + pts[p].norm2() - pts[q].norm2();
            let t = -at0 / slope;
            if t > T::zero() && t < T::one() {
                cuts.push(t);
            }
        }
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    let min_gap = if len > T::zero() { tol / len } else { T::one() };
    let mut kept: Vec<T> = Vec::new();
    for t in cuts {
        let prev = kept.last().copied().unwrap_or(T::zero());
        if t - prev > min_gap && T::one() - t > min_gap {
            kept.push(t);
        }
    }
    let mut bounds = vec![T::zero()];
    bounds.extend(kept);
    bounds.push(T::one());
    let mut out: Vec<(Vec3<T>, usize)> = Vec::new();
    for w in bounds.windows(2) {
        let owner = owner_at((w[0] + w[1]) * T::half());
        if out.last().map(|&(_, o)| o) != Some(owner) {
            out.push((a + d * w[0], owner));
        }
    }
    out
}
