//! ASCII PLY and Wavefront OBJ readers/writers (positions and triangles only).

use super::{Point, TriangleMesh};
use crate::error::{Error, Result};
use crate::Real;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    PlyAscii,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "ply" => Some(Self::PlyAscii),
            "obj" => Some(Self::Obj),
            _ => None,
        }
    }
}

/// Loads a mesh; `format` defaults to the file extension.
pub fn load_mesh<T: Real>(path: impl AsRef<Path>, format: Option<MeshFormat>) -> Result<TriangleMesh<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let format = format
        .or_else(|| MeshFormat::from_path(path))
        .ok_or_else(|| Error::parse(0, format!("unknown mesh format for {}", path.display())))?;
    let (vertices, faces) = match format {
        MeshFormat::PlyAscii => parse_ply(&text)?,
        MeshFormat::Obj => parse_obj(&text)?,
    };
    TriangleMesh::new(vertices, faces)
}

pub fn save_mesh<T: Real>(mesh: &TriangleMesh<T>, path: impl AsRef<Path>, format: Option<MeshFormat>) -> Result<()> {
    let path = path.as_ref();
    let format = format
        .or_else(|| MeshFormat::from_path(path))
        .unwrap_or(MeshFormat::PlyAscii);
    let text = match format {
        MeshFormat::PlyAscii => write_ply(mesh),
        MeshFormat::Obj => write_obj(mesh),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<String>,
}

pub fn parse_ply<T: Real>(text: &str) -> Result<(Vec<Point<T>>, Vec<[usize; 3]>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(Error::parse(1, "missing 'ply' magic")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        let (ln, line) = lines.next().ok_or_else(|| Error::parse(0, "unterminated PLY header"))?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("ascii") {
                    return Err(Error::parse(ln, "only ASCII PLY is supported"));
                }
            }
            Some("element") => {
                let name = tok.next().ok_or_else(|| Error::parse(ln, "element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::parse(ln, "element without count"))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(ln, "property before element"))?;
                let name = tok.last().ok_or_else(|| Error::parse(ln, "property without name"))?;
                el.properties.push(name.to_string());
            }
            Some("end_header") => break,
            _ => {}
        }
    }

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for el in &elements {
        match el.name.as_str() {
            "vertex" => {
                let idx: Vec<usize> = ["x", "y", "z"]
                    .iter()
                    .map(|axis| {
                        el.properties
                            .iter()
                            .position(|p| p == axis)
                            .ok_or_else(|| Error::parse(0, format!("vertex element lacks '{axis}'")))
                    })
                    .collect::<Result<_>>()?;
                for _ in 0..el.count {
                    let (ln, line) = lines.next().ok_or_else(|| Error::parse(0, "truncated vertex list"))?;
                    let vals: Vec<f64> = line
                        .split_whitespace()
                        .map(|t| {
                            t.parse::<f64>()
                                .map_err(|_| Error::parse(ln, format!("bad number '{t}'")))
                        })
                        .collect::<Result<_>>()?;
                    if vals.len() < el.properties.len() {
                        return Err(Error::parse(ln, "too few vertex properties"));
                    }
                    vertices.push(Point::new(
                        T::lit(vals[idx[0]]),
                        T::lit(vals[idx[1]]),
                        T::lit(vals[idx[2]]),
                    ));
                }
            }
            "face" => {
                for fi in 0..el.count {
                    let (ln, line) = lines.next().ok_or_else(|| Error::parse(0, "truncated face list"))?;
                    let vals: Vec<usize> = line
                        .split_whitespace()
                        .map(|t| {
                            t.parse::<usize>()
                                .map_err(|_| Error::parse(ln, format!("bad index '{t}'")))
                        })
                        .collect::<Result<_>>()?;
                    let n = *vals.first().ok_or_else(|| Error::parse(ln, "empty face line"))?;
                    if vals.len() < n + 1 {
                        return Err(Error::parse(ln, "face list shorter than its count"));
                    }
                    if n != 3 {
                        return Err(Error::NonTriangleFace { face: fi, count: n });
                    }
                    faces.push([vals[1], vals[2], vals[3]]);
                }
            }
            _ => {
                for _ in 0..el.count {
                    lines
                        .next()
                        .ok_or_else(|| Error::parse(0, format!("truncated '{}' element", el.name)))?;
                }
            }
        }
    }
    Ok((vertices, faces))
}

pub fn parse_obj<T: Real>(text: &str) -> Result<(Vec<Point<T>>, Vec<[usize; 3]>)> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let c: Vec<f64> = tok
                    .take(3)
                    .map(|t| t.parse().map_err(|_| Error::parse(ln, format!("bad number '{t}'"))))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(Error::parse(ln, "vertex needs 3 coordinates"));
                }
                vertices.push(Point::new(T::lit(c[0]), T::lit(c[1]), T::lit(c[2])));
            }
            Some("f") => {
                let idx: Vec<usize> = tok
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or("");
                        let raw: i64 = first
                            .parse()
                            .map_err(|_| Error::parse(ln, format!("bad index '{t}'")))?;
                        let resolved = if raw < 0 { vertices.len() as i64 + raw } else { raw - 1 };
                        usize::try_from(resolved).map_err(|_| Error::parse(ln, format!("index out of range '{t}'")))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != 3 {
                    return Err(Error::NonTriangleFace {
                        face: faces.len(),
                        count: idx.len(),
                    });
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

fn write_ply<T: Real>(mesh: &TriangleMesh<T>) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices().len(),
        mesh.faces().len()
    );
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", v.x.as_f64(), v.y.as_f64(), v.z.as_f64());
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    s
}

fn write_obj<T: Real>(mesh: &TriangleMesh<T>) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {:.17e} {:.17e} {:.17e}", v.x.as_f64(), v.y.as_f64(), v.z.as_f64());
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}
