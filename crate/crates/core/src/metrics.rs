//! Geometric and feature-line comparison of two meshes.
//!
//! Point-set metrics run on area-uniform surface samples; the edge metrics
//! on samples drawn along sharp edges. All nearest-neighbor queries are exact.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::TriangleMesh;
use crate::remesh::mesh_quality;
use crate::scalar::Real;
use crate::spatial::{sample_edges, sample_surface, PointIndex};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig<T> {
    pub sample_count: usize,
    /// F-score distance threshold as a fraction of the ground-truth bounding-box diagonal.
    pub f1_threshold: T,
    pub edge_dihedral_deg: T,
    pub edge_sample_count: usize,
    pub seed: u64,
}

impl<T: Real> Default for MetricsConfig<T> {
    fn default() -> Self {
        Self {
            sample_count: 100_000,
            f1_threshold: T::lit(0.005),
            edge_dihedral_deg: T::lit(30.0),
            edge_sample_count: 20_000,
            seed: 0,
        }
    }
}

impl<T: Real> MetricsConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 || self.edge_sample_count == 0 {
            return Err(Error::InvalidConfig("sample counts must be positive".into()));
        }
        if !(self.f1_threshold > T::zero()) || !(self.edge_dihedral_deg > T::zero()) {
            return Err(Error::InvalidConfig("thresholds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport<T> {
    pub cd: T,
    pub hd: T,
    pub f1: T,
    pub nc: T,
    pub ecd: T,
    pub ef1: T,
    pub triangle_q_mean: T,
    pub triangle_q_min: T,
    pub open_b: usize,
    pub nmv: usize,
    pub config_echo: MetricsConfig<T>,
}

/// Distance from every point of `from` to its nearest point of `to`.
fn nn_distances<T: Real>(from: &[Vec3<T>], to: &[Vec3<T>]) -> Result<Vec<T>> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let index = PointIndex::new(to.to_vec());
    Ok(from
        .par_iter()
        .map(|&p| index.nearest_d2(p).map(|(_, d2)| d2.sqrt()).unwrap_or(T::infinity()))
        .collect())
}

fn mean<T: Real>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::from_usize_lossy(v.len())
}

/// Symmetric mean nearest-neighbor distance, `(mean_x d(x, Y) + mean_y d(y, X)) / 2`.
pub fn chamfer<T: Real>(x: &[Vec3<T>], y: &[Vec3<T>]) -> Result<T> {
    let a = nn_distances(x, y)?;
    let b = nn_distances(y, x)?;
    Ok((mean(&a) + mean(&b)) * T::half())
}

/// Two-sided Hausdorff distance.
pub fn hausdorff<T: Real>(x: &[Vec3<T>], y: &[Vec3<T>]) -> Result<T> {
    let a = nn_distances(x, y)?;
    let b = nn_distances(y, x)?;
    Ok(a.into_iter().chain(b).fold(T::zero(), T::max))
}

/// Harmonic mean of precision (share of `y` within `threshold` of `x`) and
/// recall (share of `x` within `threshold` of `y`); 0 when both are 0.
pub fn fscore<T: Real>(x: &[Vec3<T>], y: &[Vec3<T>], threshold: T) -> Result<T> {
    let share = |d: Vec<T>| {
        let n = d.len();
        T::from_usize_lossy(d.into_iter().filter(|&v| v <= threshold).count()) / T::from_usize_lossy(n)
    };
    let recall = share(nn_distances(x, y)?);
    let precision = share(nn_distances(y, x)?);
    let s = precision + recall;
    Ok(if s > T::zero() {
        T::two() * precision * recall / s
    } else {
        T::zero()
    })
}

/// Mean `|n(p) · n(nearest(p))|`, averaged over both directions.
pub fn normal_consistency<T: Real>(x: &[Vec3<T>], nx: &[Vec3<T>], y: &[Vec3<T>], ny: &[Vec3<T>]) -> Result<T> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let one_way = |from: &[Vec3<T>], nf: &[Vec3<T>], to: &[Vec3<T>], nt: &[Vec3<T>]| -> T {
        let index = PointIndex::new(to.to_vec());
        let dots: Vec<T> = from
            .par_iter()
            .zip(nf)
            .map(|(&p, &n)| {
                let (j, _) = index.nearest_d2(p).expect("non-empty index");
                n.dot(nt[j]).abs()
            })
            .collect();
        mean(&dots)
    };
    Ok((one_way(x, nx, y, ny) + one_way(y, ny, x, nx)) * T::half())
}

/// Edge chamfer distance and edge F-score between the sharp-edge samples of
/// the two meshes. `threshold` is absolute; `sentinel` is returned as the
/// distance when only one mesh has sharp edges.
pub fn edge_metrics<T: Real>(
    gt: &TriangleMesh<T>,
    simplified: &TriangleMesh<T>,
    cfg: &MetricsConfig<T>,
) -> Result<(T, T)> {
    let diag = gt.bbox_diagonal();
    let threshold = cfg.f1_threshold * diag;
    let sample = |m: &TriangleMesh<T>| {
        let edges = m.feature_edges(cfg.edge_dihedral_deg);
        sample_edges(m, &edges, cfg.edge_sample_count, cfg.seed)
    };
    let (a, b) = (sample(gt), sample(simplified));
    match (a.is_empty(), b.is_empty()) {
        (true, true) => Ok((T::zero(), T::one())),
        (true, false) | (false, true) => Ok((diag, T::zero())),
        (false, false) => Ok((chamfer(&a, &b)?, fscore(&a, &b, threshold)?)),
    }
}

/// Every metric for one (ground truth, simplified) pair. Both meshes are
/// sampled with the same seed.
pub fn full_report<T: Real>(
    gt: &TriangleMesh<T>,
    simplified: &TriangleMesh<T>,
    cfg: &MetricsConfig<T>,
) -> Result<MetricsReport<T>> {
    cfg.validate()?;
    let draw = |m: &TriangleMesh<T>| {
        let s = sample_surface(m, cfg.sample_count, cfg.seed);
        let pts: Vec<Vec3<T>> = s.iter().map(|s| s.point).collect();
        let nrm: Vec<Vec3<T>> = s.iter().map(|s| s.normal).collect();
        (pts, nrm)
    };
    let (x, nx) = draw(gt);
    let (y, ny) = draw(simplified);
    let to_y = nn_distances(&x, &y)?;
    let to_x = nn_distances(&y, &x)?;
    let cd = (mean(&to_y) + mean(&to_x)) * T::half();
    let hd = to_y.iter().chain(&to_x).copied().fold(T::zero(), T::max);
    let f1 = fscore(&x, &y, cfg.f1_threshold * gt.bbox_diagonal())?;
    let nc = normal_consistency(&x, &nx, &y, &ny)?;
    let (ecd, ef1) = edge_metrics(gt, simplified, cfg)?;
    let q = mesh_quality(simplified);
    Ok(MetricsReport {
        cd,
        hd,
        f1,
        nc,
        ecd,
        ef1,
        triangle_q_mean: q.triangle_q_mean,
        triangle_q_min: q.triangle_q_min,
        open_b: q.open_b,
        nmv: q.nmv,
        config_echo: cfg.clone(),
    })
}
