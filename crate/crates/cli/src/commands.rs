use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use cwf_core::energy::{density_field, CvtMetric, DensityMode, KernelConfig};
use cwf_core::metrics::{full_report, MetricsConfig};
use cwf_core::mesh::{load_mesh, write_mesh};
use cwf_core::optimizer::{
    custom_sites, initialize_sites, simplify_from, InitMethod, OptimizerConfig, StopReason,
};
use cwf_core::remesh::extract_dual;
use cwf_core::rvd::{compute_rvd, compute_rvd_thinplate, export_rvd, multi_component_cells, SiteSet};
use cwf_core::{Mesh, Point, Transform};

use crate::manifest::{self, RunManifest};

/// Error with the process exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CmdResult = Result<(), Failure>;

fn io_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: e.into() }
}

fn config_err(msg: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        error: anyhow!(msg.into()),
    }
}

fn optimization_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 3, error: e.into() }
}

fn core_err(e: cwf_core::Error) -> Failure {
    use cwf_core::Error as E;
    let code = match &e {
        E::Io { .. } | E::Format { .. } | E::EmptyMesh | E::DegenerateMesh | E::InvalidFace { .. } => 1,
        E::InvalidConfig(_) => 2,
        E::EmptyPointSet | E::SiteCountMismatch { .. } => 3,
    };
    Failure { code, error: e.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitArg {
    Poisson,
    Random,
    /// Points from --sites-file.
    File,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityArg {
    Uniform,
    Lfs,
}

impl From<DensityArg> for DensityMode {
    fn from(d: DensityArg) -> Self {
        match d {
            DensityArg::Uniform => DensityMode::Uniform,
            DensityArg::Lfs => DensityMode::Lfs,
        }
    }
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SimplifyArgs {
    /// Input mesh (OBJ or PLY).
    pub input: PathBuf,
    /// Number of vertices of the output mesh.
    #[arg(long)]
    pub target_vertices: usize,
    /// Output mesh (OBJ or PLY by extension).
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_na: f64,
    /// Initial CVT weight.
    #[arg(long, default_value_t = 1.0)]
    pub lambda_cvt: f64,
    /// Per-iteration decay factor of the CVT weight.
    #[arg(long, default_value_t = 0.95)]
    pub tau: f64,
    /// Stop once E_CVT exceeds mu times its running minimum.
    #[arg(long, default_value_t = 1.05)]
    pub mu: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub grad_tol: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Poisson)]
    pub init: InitArg,
    /// Site positions for `--init file`: one `x y z` (or `v x y z`) per line, input coordinates.
    #[arg(long)]
    pub sites_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DensityArg::Uniform)]
    pub density: DensityArg,
    /// Inward offset of the biased sites, as a fraction of the bounding-box diagonal.
    #[arg(long, default_value_t = 0.01)]
    pub bias: f64,
    /// Use the plain decomposition, without the thin-plate repair.
    #[arg(long)]
    pub no_thin_fix: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the final decomposition as a colored OBJ.
    #[arg(long)]
    pub export_rvd: Option<PathBuf>,
    /// Write the per-iteration trace as CSV.
    #[arg(long)]
    pub trace_csv: Option<PathBuf>,
    /// Manifest path; defaults to OUTPUT with extension `.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

impl SimplifyArgs {
    fn optimizer_config(&self) -> OptimizerConfig<f64> {
        OptimizerConfig {
            lambda_na0: self.lambda_na,
            lambda_cvt0: self.lambda_cvt,
            tau: self.tau,
            mu: self.mu,
            grad_tol: self.grad_tol,
            max_iters: self.max_iters,
            seed: self.seed,
            init: match self.init {
                InitArg::Random => InitMethod::Random,
                _ => InitMethod::PoissonDisk,
            },
            bias: self.bias,
            thin_plate: !self.no_thin_fix,
            ..OptimizerConfig::default()
        }
    }
}

/// Reads `x y z` or `v x y z` per line; blank lines and `#` comments are skipped.
fn read_points(path: &Path) -> Result<Vec<Point>, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(io_err)?;
    let mut points = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().filter(|&t| t != "v").collect();
        let xyz: Result<Vec<f64>, _> = fields.iter().take(3).map(|t| t.parse::<f64>()).collect();
        match xyz {
            Ok(v) if v.len() == 3 => points.push(Point::new(v[0], v[1], v[2])),
            _ => return Err(io_err(anyhow!("{}:{}: expected three coordinates", path.display(), k + 1))),
        }
    }
    if points.is_empty() {
        return Err(config_err(format!("{} holds no points", path.display())));
    }
    Ok(points)
}

fn load_normalized(path: &Path) -> Result<(Mesh, Transform), Failure> {
    let mesh: Mesh = load_mesh(path).map_err(core_err)?;
    mesh.normalize_area().map_err(core_err)
}

fn initial_sites(
    mesh: &Mesh,
    xf: &Transform,
    init: InitArg,
    sites_file: Option<&Path>,
    n: usize,
    seed: u64,
) -> Result<SiteSet<f64>, Failure> {
    match init {
        InitArg::File => {
            let path = sites_file.ok_or_else(|| config_err("--init file needs --sites-file"))?;
            let pts = read_points(path)?.into_iter().map(|p| xf.forward(p)).collect();
            custom_sites(mesh, pts).map_err(core_err)
        }
        InitArg::Poisson => initialize_sites(mesh, n, InitMethod::PoissonDisk, seed).map_err(core_err),
        InitArg::Random => initialize_sites(mesh, n, InitMethod::Random, seed).map_err(core_err),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(io_err)?;
    fs::write(path, text + "\n")
        .with_context(|| format!("writing {}", path.display()))
        .map_err(io_err)
}

/// Runs the pipeline. With `expect`, compares the output hashes against a
/// previous manifest instead of trusting the run.
pub fn simplify(args: &SimplifyArgs, expect: Option<&RunManifest>) -> CmdResult {
    let start = Instant::now();
    if args.target_vertices == 0 && args.init != InitArg::File {
        return Err(config_err("--target-vertices must be at least 1"));
    }
    let config = args.optimizer_config();
    config.validate().map_err(core_err)?;

    let (mesh, xf) = load_normalized(&args.input)?;
    let sites = initial_sites(&mesh, &xf, args.init, args.sites_file.as_deref(), args.target_vertices, args.seed)?;
    let kernel = KernelConfig {
        cvt_metric: match args.density {
            DensityArg::Uniform => CvtMetric::Identity,
            DensityArg::Lfs => CvtMetric::Density(density_field(&mesh, DensityMode::Lfs, 30.0)),
        },
        ..KernelConfig::new(args.lambda_na, args.lambda_cvt)
    };
    let result = simplify_from(&mesh, &config, &kernel, sites).map_err(core_err)?;
    let stop = result.trace.stop_reason;
    let last = result.trace.records.last().copied();

    let mut outputs = BTreeMap::new();
    let dual = extract_dual(&result.decomposition, &result.sites);
    let mesh_written = match dual.to_mesh(&xf) {
        Ok(m) => {
            write_mesh(&m, &args.output).map_err(core_err)?;
            outputs.insert("mesh".to_string(), args.output.clone());
            true
        }
        Err(_) => false,
    };
    if let Some(path) = &args.trace_csv {
        let file = fs::File::create(path)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(io_err)?;
        result.trace.write_csv(file).map_err(io_err)?;
        outputs.insert("trace_csv".to_string(), path.clone());
    }
    if let Some(path) = &args.export_rvd {
        export_rvd(&result.decomposition, path, |p| xf.inverse(p)).map_err(core_err)?;
        outputs.insert("rvd".to_string(), path.clone());
    }

    let mut hashes = BTreeMap::new();
    for (role, path) in &outputs {
        hashes.insert(role.clone(), manifest::sha256_file(path).map_err(io_err)?);
    }
    let record = RunManifest {
        input: args.input.clone(),
        outputs,
        output_sha256: hashes.clone(),
        config: args.clone(),
        seed: args.seed,
        versions: manifest::versions(),
        stop_reason: stop.map(|s| s.as_str().to_string()),
        iterations: last.map_or(0, |r| r.iter),
        final_e_na: last.map_or(f64::NAN, |r| r.e_na),
        final_e_cvt: last.map_or(f64::NAN, |r| r.e_cvt),
        dual_vertices: dual.vertices.len(),
        dual_triangles: dual.triangles.len(),
        wallclock_s: start.elapsed().as_secs_f64(),
    };
    let manifest_path = args.manifest.clone().unwrap_or_else(|| manifest::default_path(&args.output));
    if expect.is_none() {
        write_json(&manifest_path, &record)?;
    }

    println!(
        "{} vertices, {} triangles; stopped after {} iterations ({})",
        dual.vertices.len(),
        dual.triangles.len(),
        record.iterations,
        record.stop_reason.as_deref().unwrap_or("none"),
    );

    if let Some(previous) = expect {
        if previous.output_sha256 == hashes {
            println!("replay matches {} output(s)", hashes.len());
        } else {
            let differing: Vec<&String> = previous
                .output_sha256
                .iter()
                .filter(|(k, v)| hashes.get(*k) != Some(*v))
                .map(|(k, _)| k)
                .collect();
            return Err(optimization_err(anyhow!("replay differs in {differing:?}")));
        }
    }
    if !mesh_written {
        return Err(optimization_err(anyhow!("dual mesh is empty; too few sites for a triangulation")));
    }
    if stop == Some(StopReason::LineSearchFailure) {
        return Err(optimization_err(anyhow!("line search failed twice in a row; partial outputs written")));
    }
    Ok(())
}

pub fn replay(path: &Path) -> CmdResult {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(io_err)?;
    let m: RunManifest = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(|e| Failure { code: 2, error: e })?;
    simplify(&m.config, Some(&m))
}

#[derive(Args, Clone, Debug)]
pub struct MetricsArgs {
    /// Ground-truth mesh.
    pub gt: PathBuf,
    /// Simplified mesh.
    pub simplified: PathBuf,
    /// Surface samples per mesh.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// F-score threshold as a fraction of the ground-truth bounding-box diagonal.
    #[arg(long, default_value_t = 0.005)]
    pub f1_threshold: f64,
    /// Dihedral angle above which an edge counts as sharp.
    #[arg(long, default_value_t = 30.0)]
    pub edge_dihedral: f64,
    /// Samples along sharp edges per mesh.
    #[arg(long, default_value_t = 20_000)]
    pub edge_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

pub fn metrics(args: &MetricsArgs) -> CmdResult {
    let gt: Mesh = load_mesh(&args.gt).map_err(core_err)?;
    let simplified: Mesh = load_mesh(&args.simplified).map_err(core_err)?;
    let cfg = MetricsConfig {
        sample_count: args.samples,
        f1_threshold: args.f1_threshold,
        edge_dihedral_deg: args.edge_dihedral,
        edge_sample_count: args.edge_samples,
        seed: args.seed,
    };
    cfg.validate().map_err(core_err)?;
    let r = full_report(&gt, &simplified, &cfg).map_err(core_err)?;
    println!(
        "{:>12} {:>12} {:>8} {:>8} {:>12} {:>8} {:>10} {:>10} {:>6} {:>5}",
        "CD", "HD", "F1", "NC", "ECD", "EF1", "TriQ_mean", "TriQ_min", "OpenB", "NMV"
    );
    println!(
        "{:>12.5e} {:>12.5e} {:>8.4} {:>8.4} {:>12.5e} {:>8.4} {:>10.4} {:>10.4} {:>6} {:>5}",
        r.cd, r.hd, r.f1, r.nc, r.ecd, r.ef1, r.triangle_q_mean, r.triangle_q_min, r.open_b, r.nmv
    );
    println!(
        "F1 threshold {} x bbox diagonal; {} samples, seed {}",
        cfg.f1_threshold, cfg.sample_count, cfg.seed
    );
    if let Some(path) = &args.json {
        write_json(path, &r)?;
    }
    Ok(())
}

#[derive(Args, Clone, Debug)]
pub struct RvdArgs {
    /// Input mesh (OBJ or PLY).
    pub input: PathBuf,
    /// Colored cell OBJ to write; a `.mtl` goes next to it.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Number of sites for the poisson and random initializers.
    #[arg(long, default_value_t = 100)]
    pub sites: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Poisson)]
    pub init: InitArg,
    #[arg(long)]
    pub sites_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    pub bias: f64,
    /// Use the plain decomposition, without the thin-plate repair.
    #[arg(long)]
    pub no_thin_fix: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the cell report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Serialize)]
struct RvdReport {
    sites: usize,
    cells: usize,
    empty_sites: Vec<usize>,
    multi_component_cells: Vec<usize>,
    thin_plate: bool,
    biased_polygons: Option<usize>,
    fallback_regions: Option<usize>,
}

pub fn rvd(args: &RvdArgs) -> CmdResult {
    if !(args.bias >= 0.0 && args.bias.is_finite()) {
        return Err(config_err("--bias must be finite and non-negative"));
    }
    if args.sites == 0 && args.init != InitArg::File {
        return Err(config_err("--sites must be at least 1"));
    }
    let (mesh, xf) = load_normalized(&args.input)?;
    let sites = initial_sites(&mesh, &xf, args.init, args.sites_file.as_deref(), args.sites, args.seed)?;
    let d = if args.no_thin_fix {
        compute_rvd(&mesh, &sites)
    } else {
        compute_rvd_thinplate(&mesh, &sites, args.bias)
    };
    export_rvd(&d, &args.output, |p| xf.inverse(p)).map_err(core_err)?;
    let report = RvdReport {
        sites: sites.len(),
        cells: d.cells.len(),
        empty_sites: d.empty_sites.clone(),
        multi_component_cells: multi_component_cells(&d),
        thin_plate: !args.no_thin_fix,
        biased_polygons: d.repair.map(|r| r.biased_polygons),
        fallback_regions: d.repair.map(|r| r.fallback_regions),
    };
    println!(
        "{} sites, {} cells, {} empty, {} multi-component cells",
        report.sites,
        report.cells,
        report.empty_sites.len(),
        report.multi_component_cells.len()
    );
    if !report.multi_component_cells.is_empty() {
        println!("multi-component cells: {:?}", report.multi_component_cells);
    }
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    Ok(())
}
