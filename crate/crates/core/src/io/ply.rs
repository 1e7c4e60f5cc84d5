//! PLY output for meshes and clouds, plus a reader for the meshes this crate
//! writes (double vertices, `uchar`/`int` face lists).

use std::fmt::Write as _;
use std::path::Path;

use crate::cloud::SemanticPointCloud;
use crate::error::{OccError, Result};
use crate::recon::TriangleMesh;
use crate::Point3;

use super::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyFormat {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

impl PlyFormat {
    fn keyword(self) -> &'static str {
        match self {
            PlyFormat::Ascii => "ascii",
            PlyFormat::BinaryLittleEndian => "binary_little_endian",
        }
    }
}

pub fn write_ply_mesh(path: &Path, mesh: &TriangleMesh, format: PlyFormat) -> Result<()> {
    let mut header = format!("ply\nformat {} 1.0\n", format.keyword());
    let _ = write!(
        header,
        "element vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices().len(),
        mesh.triangles().len()
    );
    let mut out = header.into_bytes();
    match format {
        PlyFormat::Ascii => {
            let mut body = String::new();
            for v in mesh.vertices() {
                let _ = writeln!(body, "{} {} {}", v.x, v.y, v.z);
            }
            for t in mesh.triangles() {
                let _ = writeln!(body, "3 {} {} {}", t[0], t[1], t[2]);
            }
            out.extend_from_slice(body.as_bytes());
        }
        PlyFormat::BinaryLittleEndian => {
            for v in mesh.vertices() {
                for c in v.coords.iter() {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
            for t in mesh.triangles() {
                out.push(3);
                for &i in t {
                    out.extend_from_slice(&(i as i32).to_le_bytes());
                }
            }
        }
    }
    write_atomic(path, &out)
}

/// Points with their class id as a `label` property.
pub fn write_ply_points(path: &Path, cloud: &SemanticPointCloud, format: PlyFormat) -> Result<()> {
    let header = format!(
        "ply\nformat {} 1.0\nelement vertex {}\nproperty double x\nproperty double y\n\
         property double z\nproperty uchar label\nend_header\n",
        format.keyword(),
        cloud.len()
    );
    let mut out = header.into_bytes();
    match format {
        PlyFormat::Ascii => {
            let mut body = String::new();
            for (p, l) in cloud.points().iter().zip(cloud.labels()) {
                let _ = writeln!(body, "{} {} {} {l}", p.x, p.y, p.z);
            }
            out.extend_from_slice(body.as_bytes());
        }
        PlyFormat::BinaryLittleEndian => {
            for (p, l) in cloud.points().iter().zip(cloud.labels()) {
                for c in p.coords.iter() {
                    out.extend_from_slice(&c.to_le_bytes());
                }
                out.push(*l);
            }
        }
    }
    write_atomic(path, &out)
}

pub fn read_ply_mesh(path: &Path) -> Result<TriangleMesh> {
    let bytes = super::read_bytes(path)?;
    let bad = |reason: &str| OccError::malformed(path, reason);
    let end = bytes
        .windows(11)
        .position(|w| w == b"end_header\n")
        .ok_or_else(|| bad("missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8"))?;
    let body = &bytes[end + 11..];
    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(bad("missing 'ply' signature"));
    }
    let mut format = None;
    let (mut nv, mut nf) = (None, None);
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "ascii", _] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", _] => format = Some(PlyFormat::BinaryLittleEndian),
            ["format", ..] => return Err(bad("unsupported PLY format")),
            ["element", "vertex", n] => nv = n.parse::<usize>().ok(),
            ["element", "face", n] => nf = n.parse::<usize>().ok(),
            ["property", "double", "x" | "y" | "z"] => {}
            ["property", "list", "uchar", "int", "vertex_indices"] => {}
            ["comment", ..] | [] => {}
            _ => return Err(bad(&format!("unsupported header line '{line}'"))),
        }
    }
    let format = format.ok_or_else(|| bad("missing format line"))?;
    let (nv, nf) = (
        nv.ok_or_else(|| bad("missing vertex element"))?,
        nf.unwrap_or(0),
    );
    let mut vertices = Vec::with_capacity(nv);
    let mut triangles = Vec::with_capacity(nf);
    match format {
        PlyFormat::Ascii => {
            let text = std::str::from_utf8(body).map_err(|_| bad("body is not UTF-8"))?;
            let mut rows = text.lines().filter(|l| !l.trim().is_empty());
            for _ in 0..nv {
                let v: Vec<f64> = rows
                    .next()
                    .ok_or_else(|| bad("too few vertex rows"))?
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| bad("bad vertex value")))
                    .collect::<Result<_>>()?;
                if v.len() != 3 {
                    return Err(bad("vertex row needs 3 values"));
                }
                vertices.push(Point3::new(v[0], v[1], v[2]));
            }
            for _ in 0..nf {
                let f: Vec<u32> = rows
                    .next()
                    .ok_or_else(|| bad("too few face rows"))?
                    .split_whitespace()
                    .map(|t| t.parse::<u32>().map_err(|_| bad("bad face index")))
                    .collect::<Result<_>>()?;
                if f.len() != 4 || f[0] != 3 {
                    return Err(bad("only triangle faces are supported"));
                }
                triangles.push([f[1], f[2], f[3]]);
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let need = nv * 24 + nf * 13;
            if body.len() != need {
                return Err(bad(&format!("body has {} bytes, expected {need}", body.len())));
            }
            let f64_at = |o: usize| f64::from_le_bytes(body[o..o + 8].try_into().unwrap());
            for i in 0..nv {
                let o = i * 24;
                vertices.push(Point3::new(f64_at(o), f64_at(o + 8), f64_at(o + 16)));
            }
            for i in 0..nf {
                let o = nv * 24 + i * 13;
                if body[o] != 3 {
                    return Err(bad("only triangle faces are supported"));
                }
                let idx = |k: usize| i32::from_le_bytes(body[o + 1 + 4 * k..o + 5 + 4 * k].try_into().unwrap());
                let t = [idx(0), idx(1), idx(2)];
                if t.iter().any(|&v| v < 0) {
                    return Err(bad("negative face index"));
                }
                triangles.push(t.map(|v| v as u32));
            }
        }
    }
    TriangleMesh::new(vertices, triangles).map_err(|e| bad(&e.to_string()))
}
