use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::SimplifyArgs;

/// Record of one `simplify` run; enough to repeat it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub input: PathBuf,
    /// Output role (`mesh`, `trace_csv`, `rvd`) to path.
    pub outputs: BTreeMap<String, PathBuf>,
    /// SHA-256 of every output file, keyed like `outputs`.
    pub output_sha256: BTreeMap<String, String>,
    /// Every flag after defaults were applied.
    pub config: SimplifyArgs,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub stop_reason: Option<String>,
    pub iterations: usize,
    pub final_e_na: f64,
    pub final_e_cvt: f64,
    pub dual_vertices: usize,
    pub dual_triangles: usize,
    pub wallclock_s: f64,
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("cwf-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("cwf-core".to_string(), cwf_core::VERSION.to_string()),
    ])
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// `out.obj` -> `out.manifest.json`.
pub fn default_path(output: &Path) -> PathBuf {
    output.with_extension("manifest.json")
}
