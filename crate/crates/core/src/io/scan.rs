//! KITTI-style binary scans: `.bin` holds `x y z intensity` as little-endian
//! f32 (16 bytes per point), `.label` holds one little-endian u32 per point
//! whose low 16 bits are the semantic id.

use std::collections::HashMap;
use std::path::Path;

use crate::cloud::SemanticPointCloud;
use crate::error::{OccError, Result};
use crate::grid::{LabelMap, NOISE};
use crate::Point3;

use super::write_atomic;

/// Positions and intensities of one scan.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointScan {
    pub points: Vec<Point3>,
    pub intensity: Vec<f32>,
}

pub fn read_point_bin(path: &Path) -> Result<PointScan> {
    let bytes = super::read_bytes(path)?;
    if bytes.len() % 16 != 0 {
        return Err(OccError::malformed(
            path,
            format!("{} bytes is not a multiple of the 16-byte point record", bytes.len()),
        ));
    }
    let mut scan = PointScan::default();
    for rec in bytes.chunks_exact(16) {
        let f = |o: usize| f32::from_le_bytes(rec[o..o + 4].try_into().unwrap());
        let p = Point3::new(f(0) as f64, f(4) as f64, f(8) as f64);
        if !p.coords.iter().all(|c| c.is_finite()) {
            return Err(OccError::malformed(path, format!("non-finite point {}", scan.points.len())));
        }
        scan.points.push(p);
        scan.intensity.push(f(12));
    }
    Ok(scan)
}

pub fn write_point_bin(path: &Path, points: &[Point3], intensity: Option<&[f32]>) -> Result<()> {
    let mut out = Vec::with_capacity(points.len() * 16);
    for (i, p) in points.iter().enumerate() {
        for c in p.coords.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        let v = intensity.map_or(0.0, |s| s[i]);
        out.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &out)
}

/// Raw dataset id (low 16 bits of the label word) → class id. Ids with no
/// entry map to noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRemap {
    table: HashMap<u16, u8>,
}

impl LabelRemap {
    /// Raw ids `1..=N` are the class ids themselves.
    pub fn identity(labels: &LabelMap) -> Self {
        Self {
            table: (1..=labels.num_classes() as u16).map(|i| (i, i as u8)).collect(),
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (u16, u8)>) -> Self {
        Self {
            table: pairs.into_iter().collect(),
        }
    }

    /// Best-effort mapping of the Rellis-3D ontology onto the class names of
    /// `labels`. Names missing from `labels` are skipped.
    pub fn rellis(labels: &LabelMap) -> Self {
        const TABLE: [(u16, &str); 10] = [
            (1, "mud"),
            (3, "grass"),
            (4, "tree"),
            (15, "tree"),
            (18, "barrier"),
            (19, "bush"),
            (27, "barrier"),
            (31, "puddle"),
            (33, "mud"),
            (34, "rubble"),
        ];
        Self {
            table: TABLE
                .iter()
                .filter_map(|&(raw, name)| labels.id_of(name).map(|id| (raw, id)))
                .collect(),
        }
    }

    pub fn insert(&mut self, raw: u16, class: u8) {
        self.table.insert(raw, class);
    }

    pub fn apply(&self, word: u32) -> u8 {
        let raw = (word & 0xFFFF) as u16;
        self.table.get(&raw).copied().unwrap_or(NOISE)
    }
}

pub fn read_labels(path: &Path, remap: &LabelRemap) -> Result<Vec<u8>> {
    let bytes = super::read_bytes(path)?;
    if bytes.len() % 4 != 0 {
        return Err(OccError::malformed(
            path,
            format!("{} bytes is not a multiple of the 4-byte label record", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|w| remap.apply(u32::from_le_bytes(w.try_into().unwrap())))
        .collect())
}

/// Writes class ids as raw label words.
pub fn write_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let out: Vec<u8> = labels.iter().flat_map(|&l| (l as u32).to_le_bytes()).collect();
    write_atomic(path, &out)
}

/// Reads a `.bin`/`.label` pair into one cloud.
pub fn read_frame(cloud: &Path, labels: &Path, remap: &LabelRemap) -> Result<SemanticPointCloud> {
    let scan = read_point_bin(cloud)?;
    let ids = read_labels(labels, remap)?;
    if ids.len() != scan.points.len() {
        return Err(OccError::Pairing(format!(
            "{} has {} points but {} has {} labels",
            cloud.display(),
            scan.points.len(),
            labels.display(),
            ids.len()
        )));
    }
    SemanticPointCloud::with_columns(scan.points, ids, Some(scan.intensity), None)
}
