use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::Decomposition;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Deterministic, well-spread color for a cell.
fn color(owner: usize) -> [f64; 3] {
    // Golden-ratio hue walk, fixed saturation and value.
    let h = (owner as f64 * 0.618_033_988_749_895).fract() * 6.0;
    let (s, v) = (0.65, 0.95);
    let c = v * s;
    let x = c * (1.0 - ((h % 2.0) - 1.0).abs());
    let (r, g, b) = match h as usize {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

/// Writes every non-empty cell as an OBJ group with its own material; the
/// material library goes next to `path` with an `.mtl` extension. Polygon
/// vertices pass through `map` first, e.g. to undo normalization.
pub fn export_rvd<T: Real>(d: &Decomposition<T>, path: &Path, map: impl Fn(crate::geom::Vec3<T>) -> crate::geom::Vec3<T>) -> Result<()> {
    let mtl_path = path.with_extension("mtl");
    let mtl_name = mtl_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "cells.mtl".into());

    let mut mtl = BufWriter::new(File::create(&mtl_path).map_err(|e| Error::io(&mtl_path, e))?);
    for cell in &d.cells {
        let [r, g, b] = color(cell.owner);
        writeln!(mtl, "newmtl cell_{}\nKd {r:.4} {g:.4} {b:.4}\n", cell.owner).map_err(|e| Error::io(&mtl_path, e))?;
    }
    mtl.flush().map_err(|e| Error::io(&mtl_path, e))?;

    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "mtllib {mtl_name}")?;
        let mut next = 1usize;
        for cell in &d.cells {
            writeln!(out, "g cell_{}\nusemtl cell_{}", cell.owner, cell.owner)?;
            for poly in &cell.polygons {
                for &p in &poly.ring {
                    let [x, y, z] = map(p).to_f64();
                    writeln!(out, "v {x:.17e} {y:.17e} {z:.17e}")?;
                }
                write!(out, "f")?;
                for k in 0..poly.ring.len() {
                    write!(out, " {}", next + k)?;
                }
                writeln!(out)?;
                next += poly.ring.len();
            }
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}
