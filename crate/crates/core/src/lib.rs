//! Mesh simplification by optimizing surface sites under a combined
//! normal-anisotropy and centroidal Voronoi functional.
//!
//! The pipeline runs on a unit-area copy of the input:
//!
//! 1. [`mesh`] loads and normalizes the base surface.
//! 2. [`optimizer::initialize_sites`] places `N` sites on it.
//! 3. [`optimizer::simplify`] alternates restricted Voronoi decomposition
//!    ([`rvd`]) with quasi-Newton steps on [`energy`], decaying the CVT weight.
//! 4. [`remesh::extract_dual`] turns the final decomposition into triangles.
//! 5. [`metrics`] compares the result against the input.
//!
//! Everything geometric is generic over [`Real`]; the aliases below fix the
//! scalar to `f64`, which is what the command-line tool uses.

pub mod energy;
pub mod error;
pub mod geom;
pub mod lbfgs;
pub mod mesh;
pub mod metrics;
pub mod optimizer;
pub mod quadrature;
pub mod remesh;
pub mod rvd;
pub mod scalar;
pub mod shapes;
pub mod spatial;

pub use error::{Error, Result};
pub use geom::Vec3;
pub use scalar::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Point = geom::Vec3<f64>;
pub type Mesh = mesh::TriangleMesh<f64>;
pub type Transform = mesh::NormalizationTransform<f64>;
pub type Sites = rvd::SiteSet<f64>;
pub type Decomposition = rvd::Decomposition<f64>;
pub type Cell = rvd::RestrictedCell<f64>;
pub type Energy = energy::EnergyReport<f64>;
pub type Kernel = energy::KernelConfig<f64>;
pub type OptimizerConfig = optimizer::OptimizerConfig<f64>;
pub type Trace = optimizer::IterationTrace<f64>;
pub type MetricsConfig = metrics::MetricsConfig<f64>;
