//! The combined functional `λ_NA·E_NA + λ_CVT·E_CVT` over a decomposition.
//!
//! `E_NA` integrates the squared offset of each point from its site along the
//! local surface normal; it vanishes on planar cells. `E_CVT` integrates the
//! (optionally density weighted) squared distance to the site. The gradient
//! returned for descent keeps only the interior terms; the boundary line
//! integrals are available separately from [`eval_boundary_correction`] for
//! validation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::TriangleMesh;
use crate::quadrature::QuadratureRule;
use crate::rvd::{Boundary, Decomposition, SiteSet};
use crate::scalar::Real;
use crate::spatial::PointIndex;

/// Metric inside the CVT term.
#[derive(Clone, Debug, PartialEq)]
pub enum CvtMetric<T> {
    Identity,
    /// Scalar density per base face, multiplying the squared distance.
    Density(Vec<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelConfig<T> {
    pub lambda_na: T,
    pub lambda_cvt: T,
    pub cvt_metric: CvtMetric<T>,
}

impl<T: Real> KernelConfig<T> {
    pub fn new(lambda_na: T, lambda_cvt: T) -> Self {
        Self {
            lambda_na,
            lambda_cvt,
            cvt_metric: CvtMetric::Identity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: T| x.is_finite() && x >= T::zero();
        if !ok(self.lambda_na) || !ok(self.lambda_cvt) {
            return Err(Error::InvalidConfig("lambda weights must be finite and non-negative".into()));
        }
        if self.lambda_na == T::zero() && self.lambda_cvt == T::zero() {
            return Err(Error::InvalidConfig("at least one lambda must be positive".into()));
        }
        if let CvtMetric::Density(rho) = &self.cvt_metric {
            if rho.iter().any(|&r| !ok(r)) {
                return Err(Error::InvalidConfig("density must be finite and non-negative".into()));
            }
        }
        Ok(())
    }

    fn density(&self, face: usize) -> T {
        match &self.cvt_metric {
            CvtMetric::Identity => T::one(),
            CvtMetric::Density(rho) => rho[face],
        }
    }
}

/// Energies and per-site gradients from one evaluation.
///
/// `grad = lambda_na * grad_na + lambda_cvt * grad_cvt`. The two unweighted
/// parts are kept so a caller can re-weight without re-integrating.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReport<T> {
    pub e_na: T,
    pub e_cvt: T,
    pub e_total: T,
    pub grad: Vec<Vec3<T>>,
    pub grad_na: Vec<Vec3<T>>,
    pub grad_cvt: Vec<Vec3<T>>,
    /// `(e_na, e_cvt)` of each site's cell; zero for empty sites.
    pub per_site: Vec<(T, T)>,
}

impl<T: Real> EnergyReport<T> {
    /// Total for other weights, reusing the integrated terms.
    pub fn reweighted(&self, lambda_na: T, lambda_cvt: T) -> (T, Vec<Vec3<T>>) {
        let grad = self
            .grad_na
            .iter()
            .zip(&self.grad_cvt)
            .map(|(&a, &b)| a * lambda_na + b * lambda_cvt)
            .collect();
        (lambda_na * self.e_na + lambda_cvt * self.e_cvt, grad)
    }

    /// Euclidean norm of the stacked total gradient.
    pub fn grad_norm(&self) -> T {
        self.grad.iter().map(|g| g.norm2()).sum::<T>().sqrt()
    }
}

struct CellTerms<T> {
    e_na: T,
    e_cvt: T,
    g_na: Vec3<T>,
    g_cvt: Vec3<T>,
}

/// Evaluates both terms and the interior gradient. Contributions are summed
/// by site, then polygon, then quadrature node, so the result does not
/// depend on thread scheduling.
pub fn eval_energy<T: Real>(d: &Decomposition<T>, sites: &SiteSet<T>, k: &KernelConfig<T>) -> Result<EnergyReport<T>> {
    if d.site_count != sites.len() {
        return Err(Error::SiteCountMismatch {
            decomposition: d.site_count,
            sites: sites.len(),
        });
    }
    let rule = QuadratureRule::<T>::albrecht_collatz();
    let two = T::two();
    let terms: Vec<CellTerms<T>> = d
        .cells
        .par_iter()
        .map(|cell| {
            let xi = sites.positions[cell.owner];
            let mut t = CellTerms {
                e_na: T::zero(),
                e_cvt: T::zero(),
                g_na: Vec3::zero(),
                g_cvt: Vec3::zero(),
            };
            for poly in &cell.polygons {
                let n = poly.normal;
                let rho = k.density(poly.face);
                for (q, w) in rule.polygon_nodes(&poly.ring) {
                    let r = q - xi;
                    let dn = r.dot(n);
                    t.e_na += w * dn * dn;
                    t.e_cvt += w * rho * r.norm2();
                    t.g_na -= n * (two * w * dn);
                    t.g_cvt -= r * (two * w * rho);
                }
            }
            t
        })
        .collect();

    let n = sites.len();
    let mut report = EnergyReport {
        e_na: T::zero(),
        e_cvt: T::zero(),
        e_total: T::zero(),
        grad: vec![Vec3::zero(); n],
        grad_na: vec![Vec3::zero(); n],
        grad_cvt: vec![Vec3::zero(); n],
        per_site: vec![(T::zero(), T::zero()); n],
    };
    for (cell, t) in d.cells.iter().zip(terms) {
        let i = cell.owner;
        report.e_na += t.e_na;
        report.e_cvt += t.e_cvt;
        report.grad_na[i] = t.g_na;
        report.grad_cvt[i] = t.g_cvt;
        report.per_site[i] = (t.e_na, t.e_cvt);
    }
    let (total, grad) = report.reweighted(k.lambda_na, k.lambda_cvt);
    report.e_total = total;
    report.grad = grad;
    Ok(report)
}

/// How the boundary speed is approximated in [`eval_boundary_correction`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundarySpeed {
    /// `e_ij / (2 |e_ij|)` with `e_ij = x_j - x_i`, the value at the midpoint of the two sites.
    #[default]
    Midpoint,
    /// `(x - x_i) / |P e_ij|`, with `P` the projection onto the face plane.
    Exact,
}

/// Boundary line integrals of the normal-anisotropy gradient, per site.
///
/// For each bisector edge between cells `i` and `j`, integrates
/// `f_i - f_j` with `f_k(x) = ((x - x_k)·n)^2` by two-point Gauss, times the
/// boundary speed. Only used to validate the interior-only gradient.
pub fn eval_boundary_correction<T: Real>(d: &Decomposition<T>, sites: &SiteSet<T>, speed: BoundarySpeed) -> Vec<Vec3<T>> {
    let g = T::lit(0.5 / 3f64.sqrt());
    let gauss = [T::half() - g, T::half() + g];
    let mut out = vec![Vec3::zero(); sites.len()];
    for cell in &d.cells {
        let i = cell.owner;
        let xi = sites.positions[i];
        let mut acc = Vec3::zero();
        for poly in &cell.polygons {
            let n = poly.normal;
            let m = poly.ring.len();
            for (k, label) in poly.labels.iter().enumerate() {
                let Boundary::Site(j) = *label else { continue };
                if j == i || j >= sites.len() {
                    continue;
                }
                let xj = sites.positions[j];
                let (a, b) = (poly.ring[k], poly.ring[(k + 1) % m]);
                let len = a.dist(b);
                let e = xj - xi;
                let pe = e - n * e.dot(n);
                for &t in &gauss {
                    let x = a.lerp(b, t);
                    let fi = (x - xi).dot(n).powi(2);
                    let fj = (x - xj).dot(n).powi(2);
                    let v = match speed {
                        BoundarySpeed::Midpoint => e / (T::two() * e.norm()),
                        BoundarySpeed::Exact => (x - xi) / pe.norm(),
                    };
                    acc += v * ((fi - fj) * len * T::half());
                }
            }
        }
        out[i] = acc;
    }
    out
}

/// Per-face density source for the CVT term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityMode {
    #[default]
    Uniform,
    /// Inverse square of an approximate local feature size.
    Lfs,
}

pub const DENSITY_MAX: f64 = 100.0;

/// Density per face. For [`DensityMode::Lfs`] the local feature size of a
/// face is the distance from its centroid to the nearest endpoint of a
/// feature edge (dihedral above `dihedral_deg`); the density is
/// `(lfs_max / lfs)^2` clamped to `[1, 100]`. Without feature edges the field is uniform.
pub fn density_field<T: Real>(mesh: &TriangleMesh<T>, mode: DensityMode, dihedral_deg: T) -> Vec<T> {
    let ones = vec![T::one(); mesh.num_faces()];
    if mode == DensityMode::Uniform {
        return ones;
    }
    let mut feature_vertices: Vec<usize> = mesh
        .feature_edges(dihedral_deg)
        .into_iter()
        .flat_map(|(a, b)| [a, b])
        .collect();
    feature_vertices.sort_unstable();
    feature_vertices.dedup();
    if feature_vertices.is_empty() {
        return ones;
    }
    let index = PointIndex::new(feature_vertices.iter().map(|&v| mesh.vertices()[v]).collect());
    let lfs: Vec<T> = (0..mesh.num_faces())
        .map(|f| {
            let [a, b, c] = mesh.triangle(f);
            let centroid = (a + b + c) / T::lit(3.0);
            index.nearest(centroid).map(|(_, d)| d).unwrap_or(T::zero())
        })
        .collect();
    let lfs_max = lfs.iter().copied().fold(T::zero(), T::max);
    let cap = T::lit(DENSITY_MAX);
    lfs.into_iter()
        .map(|l| {
            if l <= T::zero() {
                cap
            } else {
                ((lfs_max / l).powi(2)).max(T::one()).min(cap)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rvd::compute_rvd;
    use crate::shapes;

    #[test]
    fn centroid_is_cvt_stationary() {
        let m = shapes::single_triangle::<f64>();
        let sites = SiteSet::new(vec![Vec3::new(1.0 / 3.0, 1.0 / 3.0, 0.0)]);
        let d = compute_rvd(&m, &sites);
        let r = eval_energy(&d, &sites, &KernelConfig::new(0.0, 1.0)).unwrap();
        assert!(r.grad[0].norm() < 1e-10);
        assert!(r.e_cvt > 0.0);
        assert_eq!(r.e_na, 0.0);
    }

    #[test]
    fn mismatch_and_invalid_config() {
        let m = shapes::single_triangle::<f64>();
        let sites = SiteSet::new(vec![Vec3::new(0.2, 0.2, 0.0)]);
        let d = compute_rvd(&m, &sites);
        let two = SiteSet::new(vec![Vec3::zero(); 2]);
        assert!(matches!(
            eval_energy(&d, &two, &KernelConfig::new(1.0, 1.0)),
            Err(Error::SiteCountMismatch { .. })
        ));
        assert!(KernelConfig::new(0.0, 0.0).validate().is_err());
        assert!(KernelConfig::new(-1.0, 1.0).validate().is_err());
        assert!(KernelConfig::new(1.0, 0.0).validate().is_ok());
    }

    #[test]
    fn total_is_weighted_sum() {
        let m = shapes::icosphere::<f64>(2);
        let sites = SiteSet::new(m.vertices().iter().step_by(5).copied().collect());
        let d = compute_rvd(&m, &sites);
        let k = KernelConfig::new(2.5, 0.3);
        let r = eval_energy(&d, &sites, &k).unwrap();
        assert!((r.e_total - (2.5 * r.e_na + 0.3 * r.e_cvt)).abs() <= 1e-12 * r.e_total);
        let sum_na: f64 = r.per_site.iter().map(|p| p.0).sum();
        assert!((sum_na - r.e_na).abs() < 1e-12);
    }

    #[test]
    fn uniform_density_is_one() {
        let m = shapes::cube::<f64>(2);
        assert!(density_field(&m, DensityMode::Uniform, 30.0).iter().all(|&r| r == 1.0));
    }
}
