//! OBJ and PLY reading, OBJ and ASCII PLY writing.
//!
//! Only positions and triangle connectivity are read. Texture coordinates,
//! normals and any other attributes are skipped; normals are always
//! recomputed from the winding.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use byteorder::{BigEndian, LittleEndian, ReadBytesExt};

use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::scalar::Real;

/// Loads an OBJ or PLY file. The format is chosen by extension, falling back
/// to sniffing the `ply` magic.
pub fn load_mesh<T: Real>(path: impl AsRef<Path>) -> Result<TriangleMesh<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let is_ply = match ext.as_deref() {
        Some("ply") => true,
        Some("obj") => false,
        _ => reader
            .fill_buf()
            .map(|b| b.starts_with(b"ply"))
            .map_err(|e| Error::io(path, e))?,
    };
    if is_ply {
        read_ply(reader)
    } else {
        read_obj(reader)
    }
}

/// Writes the mesh as ASCII PLY when the path ends in `.ply`, OBJ otherwise.
pub fn write_mesh<T: Real>(mesh: &TriangleMesh<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let is_ply = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("ply"));
    let res = if is_ply {
        write_ply(mesh, &mut w)
    } else {
        write_obj(mesh, &mut w)
    };
    res.and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn write_obj<T: Real, W: Write>(mesh: &TriangleMesh<T>, w: &mut W) -> std::io::Result<()> {
    for p in mesh.vertices() {
        writeln!(w, "v {} {} {}", p.x, p.y, p.z)?;
    }
    for f in mesh.faces() {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

pub fn write_ply<T: Real, W: Write>(mesh: &TriangleMesh<T>, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", mesh.num_vertices())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    writeln!(w, "element face {}", mesh.num_faces())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")?;
    for p in mesh.vertices() {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    for f in mesh.faces() {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

fn parse_float<T: Real>(tok: Option<&str>, line: usize) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::format(line, "missing coordinate"))?;
    tok.parse::<f64>()
        .map(T::lit)
        .map_err(|_| Error::format(line, format!("invalid number '{tok}'")))
}

/// Reads an ASCII OBJ stream. Polygons are fan-triangulated.
pub fn read_obj<T: Real, R: BufRead>(reader: R) -> Result<TriangleMesh<T>> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    // (face, line) for range checks after all vertices are known.
    let mut face_lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::format(lineno, e.to_string()))?;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_float(toks.next(), lineno)?;
                let y = parse_float(toks.next(), lineno)?;
                let z = parse_float(toks.next(), lineno)?;
                vertices.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for tok in toks {
                    let idx = tok.split('/').next().unwrap_or("");
                    let raw: i64 = idx
                        .parse()
                        .map_err(|_| Error::format(lineno, format!("invalid index '{tok}'")))?;
                    let resolved = match raw {
                        0 => return Err(Error::format(lineno, "OBJ indices are 1-based; got 0")),
                        r if r > 0 => (r - 1) as usize,
                        r => {
                            let back = (-r) as usize;
                            if back > vertices.len() {
                                return Err(Error::format(
                                    lineno,
                                    format!("relative index {r} before start"),
                                ));
                            }
                            vertices.len() - back
                        }
                    };
                    poly.push(resolved);
                }
                if poly.len() < 3 {
                    return Err(Error::format(lineno, "face with fewer than 3 vertices"));
                }
                for k in 1..poly.len() - 1 {
                    faces.push([poly[0], poly[k], poly[k + 1]]);
                    face_lines.push(lineno);
                }
            }
            _ => {}
        }
    }
    for (f, &lineno) in faces.iter().zip(&face_lines) {
        if f.iter().any(|&v| v >= vertices.len()) {
            return Err(Error::format(lineno, "vertex index out of range"));
        }
        if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            return Err(Error::format(lineno, "face repeats a vertex"));
        }
    }
    TriangleMesh::new(vertices, faces)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Encoding {
    Ascii,
    LittleEndian,
    BigEndian,
}

#[derive(Clone, Copy, Debug)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Clone, Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct PlyReader<R> {
    inner: R,
    encoding: Encoding,
    line: usize,
    tokens: Vec<String>,
    cursor: usize,
}

impl<R: BufRead> PlyReader<R> {
    fn next_token(&mut self) -> Result<String> {
        while self.cursor >= self.tokens.len() {
            let mut buf = String::new();
            let n = self
                .inner
                .read_line(&mut buf)
                .map_err(|e| Error::format(self.line, e.to_string()))?;
            if n == 0 {
                return Err(Error::format(self.line, "unexpected end of file"));
            }
            self.line += 1;
            self.tokens = buf.split_whitespace().map(str::to_owned).collect();
            self.cursor = 0;
        }
        self.cursor += 1;
        Ok(self.tokens[self.cursor - 1].clone())
    }

    fn read(&mut self, ty: Scalar) -> Result<f64> {
        if self.encoding == Encoding::Ascii {
            let tok = self.next_token()?;
            return tok
                .parse::<f64>()
                .map_err(|_| Error::format(self.line, format!("invalid number '{tok}'")));
        }
        let line = self.line;
        let err = |e: std::io::Error| Error::format(line, format!("binary body: {e}"));
        let r = &mut self.inner;
        Ok(match (self.encoding, ty) {
            (_, Scalar::I8) => r.read_i8().map_err(err)? as f64,
            (_, Scalar::U8) => r.read_u8().map_err(err)? as f64,
            (Encoding::LittleEndian, Scalar::I16) => r.read_i16::<LittleEndian>().map_err(err)? as f64,
            (Encoding::LittleEndian, Scalar::U16) => r.read_u16::<LittleEndian>().map_err(err)? as f64,
            (Encoding::LittleEndian, Scalar::I32) => r.read_i32::<LittleEndian>().map_err(err)? as f64,
            (Encoding::LittleEndian, Scalar::U32) => r.read_u32::<LittleEndian>().map_err(err)? as f64,
            (Encoding::LittleEndian, Scalar::F32) => r.read_f32::<LittleEndian>().map_err(err)? as f64,
            (Encoding::LittleEndian, Scalar::F64) => r.read_f64::<LittleEndian>().map_err(err)?,
            (_, Scalar::I16) => r.read_i16::<BigEndian>().map_err(err)? as f64,
            (_, Scalar::U16) => r.read_u16::<BigEndian>().map_err(err)? as f64,
            (_, Scalar::I32) => r.read_i32::<BigEndian>().map_err(err)? as f64,
            (_, Scalar::U32) => r.read_u32::<BigEndian>().map_err(err)? as f64,
            (_, Scalar::F32) => r.read_f32::<BigEndian>().map_err(err)? as f64,
            (_, Scalar::F64) => r.read_f64::<BigEndian>().map_err(err)?,
        })
    }

    /// Moves to the next record in ASCII mode, so each element row is parsed
    /// from its own line.
    fn end_record(&mut self) {
        if self.encoding == Encoding::Ascii {
            self.cursor = self.tokens.len();
        }
    }
}

/// Reads an ASCII or binary PLY stream with `vertex` (x, y, z) and `face`
/// (vertex index list) elements. Polygons are fan-triangulated.
pub fn read_ply<T: Real, R: BufRead>(mut reader: R) -> Result<TriangleMesh<T>> {
    let mut line_no = 0usize;
    let mut read_header_line = |reader: &mut R| -> Result<(usize, String)> {
        let mut raw = Vec::new();
        let n = reader
            .read_until(b'\n', &mut raw)
            .map_err(|e| Error::format(line_no + 1, e.to_string()))?;
        line_no += 1;
        if n == 0 {
            return Err(Error::format(line_no, "unexpected end of header"));
        }
        let s = String::from_utf8(raw)
            .map_err(|_| Error::format(line_no, "non-UTF8 header"))?
            .trim()
            .to_owned();
        Ok((line_no, s))
    };

    let (_, magic) = read_header_line(&mut reader)?;
    if magic != "ply" {
        return Err(Error::format(1, "missing 'ply' magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    let header_end;
    loop {
        let (ln, l) = read_header_line(&mut reader)?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks.first().copied() {
            Some("format") => {
                encoding = Some(match toks.get(1).copied() {
                    Some("ascii") => Encoding::Ascii,
                    Some("binary_little_endian") => Encoding::LittleEndian,
                    Some("binary_big_endian") => Encoding::BigEndian,
                    other => {
                        return Err(Error::format(ln, format!("unknown format {other:?}")))
                    }
                });
            }
            Some("element") => {
                let (Some(name), Some(count)) = (toks.get(1), toks.get(2)) else {
                    return Err(Error::format(ln, "malformed element line"));
                };
                let count = count
                    .parse()
                    .map_err(|_| Error::format(ln, "invalid element count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::format(ln, "property before element"))?;
                let bad = || Error::format(ln, "malformed property line");
                if toks.get(1) == Some(&"list") {
                    let count = toks.get(2).and_then(|s| Scalar::parse(s)).ok_or_else(bad)?;
                    let item = toks.get(3).and_then(|s| Scalar::parse(s)).ok_or_else(bad)?;
                    let name = toks.get(4).ok_or_else(bad)?.to_string();
                    el.props.push(Property::List { name, count, item });
                } else {
                    let ty = toks.get(1).and_then(|s| Scalar::parse(s)).ok_or_else(bad)?;
                    let name = toks.get(2).ok_or_else(bad)?.to_string();
                    el.props.push(Property::Scalar { name, ty });
                }
            }
            Some("end_header") => {
                header_end = ln;
                break;
            }
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => {
                return Err(Error::format(ln, format!("unexpected header keyword '{other}'")))
            }
        }
    }
    let encoding = encoding.ok_or_else(|| Error::format(header_end, "missing format line"))?;

    let mut body = PlyReader {
        inner: reader,
        encoding,
        line: header_end,
        tokens: Vec::new(),
        cursor: 0,
    };
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for el in &elements {
        let xyz: Vec<Option<usize>> = ["x", "y", "z"]
            .iter()
            .map(|n| {
                el.props
                    .iter()
                    .position(|p| matches!(p, Property::Scalar { name, .. } if name == n))
            })
            .collect();
        let list_idx = el.props.iter().position(|p| {
            matches!(p, Property::List { name, .. } if name == "vertex_indices" || name == "vertex_index")
        });
        if el.name == "vertex" && xyz.iter().any(Option::is_none) {
            return Err(Error::format(header_end, "vertex element lacks x/y/z"));
        }
        for _ in 0..el.count {
            let mut coords = [0.0f64; 3];
            let mut poly: Vec<usize> = Vec::new();
            for (pi, prop) in el.props.iter().enumerate() {
                match prop {
                    Property::Scalar { ty, .. } => {
                        let v = body.read(*ty)?;
                        for (k, slot) in xyz.iter().enumerate() {
                            if *slot == Some(pi) {
                                coords[k] = v;
                            }
                        }
                    }
                    Property::List { count, item, .. } => {
                        let n = body.read(*count)?;
                        if n < 0.0 || n.fract() != 0.0 {
                            return Err(Error::format(body.line, "invalid list length"));
                        }
                        for _ in 0..n as usize {
                            let v = body.read(*item)?;
                            if Some(pi) == list_idx {
                                if v < 0.0 || v.fract() != 0.0 {
                                    return Err(Error::format(body.line, "invalid vertex index"));
                                }
                                poly.push(v as usize);
                            }
                        }
                    }
                }
            }
            if el.name == "vertex" {
                vertices.push(Vec3::from_f64(coords));
            } else if el.name == "face" {
                if poly.len() < 3 {
                    return Err(Error::format(body.line, "face with fewer than 3 vertices"));
                }
                for k in 1..poly.len() - 1 {
                    faces.push([poly[0], poly[k], poly[k + 1]]);
                }
            }
            body.end_record();
        }
    }
    let nv = vertices.len();
    if let Some(f) = faces.iter().find(|f| f.iter().any(|&v| v >= nv)) {
        return Err(Error::format(
            body.line,
            format!("face {f:?} references a vertex beyond {nv}"),
        ));
    }
    TriangleMesh::new(vertices, faces)
}
