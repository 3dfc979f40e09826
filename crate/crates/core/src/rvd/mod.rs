//! Restricted Voronoi decomposition of the base surface by a set of sites,
//! with an optional repair pass for thin plates.
//!
//! Each base face is clipped against the bisector half-spaces of the sites
//! whose Voronoi cells reach it. Every polygon edge remembers what produced
//! it, either a side of the base triangle or the bisector with a given site;
//! the labels drive neighbor discovery, the thin-plate repair and the
//! boundary integrals in [`crate::energy`].

mod clip;
mod export;
mod thinplate;
mod topology;

use serde::Serialize;

pub use export::export_rvd;
pub use topology::{cell_adjacency, cell_components, multi_component_cells};

use crate::geom::Vec3;
use crate::mesh::TriangleMesh;
use crate::scalar::Real;
use crate::spatial::SurfaceIndex;

use clip::{Clipper, Piece};

/// Relative tolerance, in units of the bounding-box diagonal, below which
/// polygon vertices are treated as coincident.
pub const WELD_TOLERANCE: f64 = 1e-9;

/// Origin of a polygon edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Boundary {
    /// Lies on edge `k` of the source triangle, running from corner `k` to `k + 1`.
    Face(u8),
    /// Lies on the bisector between the owner and this site.
    Site(usize),
}

/// The movable points. `biased_positions`, when present, holds the inward
/// offsets used by the thin-plate repair.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteSet<T> {
    pub positions: Vec<Vec3<T>>,
    pub biased_positions: Option<Vec<Vec3<T>>>,
}

impl<T: Real> SiteSet<T> {
    pub fn new(positions: Vec<Vec3<T>>) -> Self {
        Self {
            positions,
            biased_positions: None,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Moves every site to its closest surface point; returns the faces hit.
    pub fn project(&mut self, surface: &SurfaceIndex<T>) -> Vec<usize> {
        self.biased_positions = None;
        self.positions
            .iter_mut()
            .map(|p| {
                let hit = surface.closest_point(*p);
                *p = hit.point;
                hit.face
            })
            .collect()
    }

    /// Fills `biased_positions` with `x - delta * n`, where `n` is the normal
    /// of the face containing `x`.
    pub fn with_bias(mut self, surface: &SurfaceIndex<T>, delta: T) -> Self {
        let biased = self
            .positions
            .iter()
            .map(|&p| {
                let hit = surface.closest_point(p);
                p - surface.face_normal(hit.face) * delta
            })
            .collect();
        self.biased_positions = Some(biased);
        self
    }
}

/// One planar convex piece of a cell, cut from a single base face.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellPolygon<T> {
    /// Counter-clockwise with respect to `normal`.
    pub ring: Vec<Vec3<T>>,
    /// `labels[k]` describes the edge from `ring[k]` to `ring[k + 1]`.
    #[serde(skip)]
    pub labels: Vec<Boundary>,
    pub face: usize,
    pub normal: Vec3<T>,
    pub area: T,
}

/// Region of the surface owned by one site.
#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedCell<T> {
    pub owner: usize,
    /// Sorted by source face.
    pub polygons: Vec<CellPolygon<T>>,
}

impl<T: Real> RestrictedCell<T> {
    pub fn area(&self) -> T {
        self.polygons.iter().map(|p| p.area).sum()
    }

    /// Area-weighted centroid.
    pub fn centroid(&self) -> Vec3<T> {
        let mut acc = Vec3::zero();
        let mut area = T::zero();
        for p in &self.polygons {
            acc += crate::geom::polygon_centroid(&p.ring) * p.area;
            area += p.area;
        }
        if area > T::zero() {
            acc / area
        } else {
            acc
        }
    }
}

/// Counters describing what the thin-plate repair changed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RepairStats {
    /// Polygons won by biased sites in the first stage.
    pub biased_polygons: usize,
    /// Connected regions formed by those polygons.
    pub biased_regions: usize,
    /// Regions with no real contributing site, handed to the nearest real site.
    pub fallback_regions: usize,
}

/// Result of a decomposition: cells sorted by owner, plus the sites that won nothing.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition<T> {
    pub cells: Vec<RestrictedCell<T>>,
    pub empty_sites: Vec<usize>,
    pub site_count: usize,
    pub repair: Option<RepairStats>,
    faces: Vec<[usize; 3]>,
    tolerance: T,
}

impl<T: Real> Decomposition<T> {
    fn assemble(mesh: &TriangleMesh<T>, site_count: usize, per_face: Vec<Vec<Piece<T>>>, tolerance: T) -> Self {
        let mut polys: Vec<Vec<CellPolygon<T>>> = vec![Vec::new(); site_count];
        for (f, pieces) in per_face.into_iter().enumerate() {
            let normal = mesh.face_normals()[f];
            for piece in pieces {
                let area = crate::geom::polygon_area(&piece.ring);
                polys[piece.owner].push(CellPolygon {
                    ring: piece.ring,
                    labels: piece.labels,
                    face: f,
                    normal,
                    area,
                });
            }
        }
        let mut cells = Vec::new();
        let mut empty_sites = Vec::new();
        for (owner, polygons) in polys.into_iter().enumerate() {
            if polygons.is_empty() {
                empty_sites.push(owner);
            } else {
                cells.push(RestrictedCell { owner, polygons });
            }
        }
        Self {
            cells,
            empty_sites,
            site_count,
            repair: None,
            faces: mesh.faces().to_vec(),
            tolerance,
        }
    }

    /// The cell of `site`, if it owns anything.
    pub fn cell(&self, site: usize) -> Option<&RestrictedCell<T>> {
        self.cells
            .binary_search_by_key(&site, |c| c.owner)
            .ok()
            .map(|i| &self.cells[i])
    }

    pub fn total_area(&self) -> T {
        self.cells.iter().map(|c| c.area()).sum()
    }

    /// Every polygon with its owner, in cell order.
    pub fn polygons(&self) -> impl Iterator<Item = (usize, &CellPolygon<T>)> {
        self.cells
            .iter()
            .flat_map(|c| c.polygons.iter().map(move |p| (c.owner, p)))
    }

    /// Vertex indices of the base faces the polygons refer to.
    pub fn base_faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Absolute distance under which two points count as the same.
    pub fn tolerance(&self) -> T {
        self.tolerance
    }
}

fn tolerance_for<T: Real>(mesh: &TriangleMesh<T>) -> T {
    mesh.bbox_diagonal() * T::lit(WELD_TOLERANCE)
}

/// Plain restricted Voronoi decomposition of `mesh` by the site positions.
pub fn compute_rvd<T: Real>(mesh: &TriangleMesh<T>, sites: &SiteSet<T>) -> Decomposition<T> {
    let tol = tolerance_for(mesh);
    let clipper = Clipper::new(&sites.positions, tol);
    let per_face = clipper.clip_mesh(mesh);
    Decomposition::assemble(mesh, sites.len(), per_face, tol)
}

/// Decomposition with the thin-plate repair. The biased sites sit `bias`
/// times the bounding-box diagonal below the surface, unless `sites`
/// already carries biased positions.
pub fn compute_rvd_thinplate<T: Real>(mesh: &TriangleMesh<T>, sites: &SiteSet<T>, bias: T) -> Decomposition<T> {
    match &sites.biased_positions {
        Some(b) => compute_rvd_biased(mesh, &sites.positions, b),
        None => {
            let surface = SurfaceIndex::new(mesh);
            let biased = sites.clone().with_bias(&surface, bias * mesh.bbox_diagonal());
            compute_rvd_biased(mesh, &biased.positions, biased.biased_positions.as_deref().unwrap_or(&[]))
        }
    }
}

/// Thin-plate decomposition with explicit biased positions, one per site.
pub fn compute_rvd_biased<T: Real>(mesh: &TriangleMesh<T>, positions: &[Vec3<T>], biased: &[Vec3<T>]) -> Decomposition<T> {
    assert_eq!(positions.len(), biased.len(), "one biased position per site");
    let tol = tolerance_for(mesh);
    let n = positions.len();
    let mut all = positions.to_vec();
    all.extend_from_slice(biased);
    let clipper = Clipper::new(&all, tol);
    let per_face = clipper.clip_mesh(mesh);
    let (per_face, stats) = thinplate::repair(mesh, positions, &all, per_face, tol);
    debug_assert!(per_face.iter().flatten().all(|p| p.owner < n));
    let mut d = Decomposition::assemble(mesh, n, per_face, tol);
    d.repair = Some(stats);
    d
}
