//! Coarse-to-fine surface reconstruction and voxelization.
//!
//! Ground-class points are reconstructed at a coarse lattice depth and the
//! remaining non-noise points at a fine depth; the two meshes are then
//! concatenated and voxelized.

pub mod cg;
pub mod mcubes;
pub mod mesh;
pub mod normals;
pub mod poisson;
mod tables;
pub mod voxelize;

use std::collections::HashMap;

use nalgebra::Vector3;

pub use mesh::TriangleMesh;
pub use normals::estimate_normals;
pub use poisson::{poisson_reconstruct, poisson_reconstruct_detailed, PoissonOutput};
pub use voxelize::{fill_below_surface, triangle_box_overlap, voxelize_mesh};

use crate::cloud::SemanticPointCloud;
use crate::error::{OccError, Result, StageExt};
use crate::grid::{LabelMap, NOISE};
use crate::Point3;

/// Points with unit normals.
#[derive(Debug, Clone, Default)]
pub struct OrientedPointSet {
    points: Vec<Point3>,
    normals: Vec<Vector3<f64>>,
}

impl OrientedPointSet {
    pub fn new(points: Vec<Point3>, normals: Vec<Vector3<f64>>) -> Result<Self> {
        let set = Self { points, normals };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.normals.len() {
            return Err(OccError::Precondition(format!(
                "{} points but {} normals",
                self.points.len(),
                self.normals.len()
            )));
        }
        if let Some(i) = self.normals.iter().position(|n| !((n.norm() - 1.0).abs() <= 1e-6)) {
            return Err(OccError::Precondition(format!(
                "normal {i} is not unit length ({})",
                self.normals[i].norm()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }
}

/// Lattice depth and solver settings of one Poisson reconstruction.
///
/// Memory grows with `4^depth` for surfaces; depths above ~10 need a large
/// machine for scene-sized inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonConfig {
    pub depth: u32,
    pub cg_max_iters: usize,
    /// Relative residual target.
    pub cg_tol: f64,
    /// Band half-width around samples, in cells.
    pub splat_radius: f64,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        Self {
            depth: 8,
            cg_max_iters: 2000,
            cg_tol: 1e-8,
            splat_radius: 2.0,
        }
    }
}

impl PoissonConfig {
    pub fn with_depth(depth: u32) -> Self {
        Self {
            depth,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(3..=13).contains(&self.depth) {
            return Err(OccError::Precondition(format!(
                "poisson depth must be in 3..=13, got {}",
                self.depth
            )));
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return Err(OccError::Precondition(format!(
                "cg_tol must be in (0, 1), got {}",
                self.cg_tol
            )));
        }
        if !(self.splat_radius > 0.0 && self.splat_radius.is_finite()) {
            return Err(OccError::Precondition("splat_radius must be positive".into()));
        }
        if self.cg_max_iters == 0 {
            return Err(OccError::Precondition("cg_max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Splits into (ground, non-ground); noise points go to neither.
pub fn split_ground(cloud: &SemanticPointCloud, labels: &LabelMap) -> (SemanticPointCloud, SemanticPointCloud) {
    let ground = cloud.filter_labels(|l| l != NOISE && labels.is_ground(l));
    let rest = cloud.filter_labels(|l| l != NOISE && !labels.is_ground(l));
    (ground, rest)
}

/// Everything the coarse-to-fine reconstruction needs besides the points.
#[derive(Debug, Clone)]
pub struct ReconSettings {
    pub coarse: PoissonConfig,
    pub fine: PoissonConfig,
    /// Neighbors used for normal estimation.
    pub k_normals: usize,
}

impl Default for ReconSettings {
    fn default() -> Self {
        Self {
            coarse: PoissonConfig::with_depth(6),
            fine: PoissonConfig::with_depth(8),
            k_normals: 16,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReconResult {
    pub mesh: TriangleMesh,
    pub ground: TriangleMesh,
    pub non_ground: TriangleMesh,
    pub warnings: Vec<String>,
}

/// Reconstructs ground and non-ground separately and concatenates the meshes.
/// A partition with fewer than [`poisson::MIN_POINTS`] points contributes an
/// empty mesh and a warning.
pub fn coarse_to_fine_reconstruct(
    cloud: &SemanticPointCloud,
    labels: &LabelMap,
    settings: &ReconSettings,
    sensor_origins: &HashMap<u32, Point3>,
) -> Result<ReconResult> {
    if settings.coarse.depth > settings.fine.depth {
        return Err(OccError::Precondition(format!(
            "coarse depth {} exceeds fine depth {}",
            settings.coarse.depth, settings.fine.depth
        )));
    }
    settings.coarse.validate()?;
    settings.fine.validate()?;
    let (ground, rest) = split_ground(cloud, labels);
    if ground.is_empty() && rest.is_empty() {
        return Err(OccError::InsufficientPoints {
            needed: poisson::MIN_POINTS,
            got: 0,
        });
    }
    let mut out = ReconResult::default();
    let mut part = |name: &'static str, pts: &SemanticPointCloud, cfg: &PoissonConfig| -> Result<TriangleMesh> {
        if pts.len() < poisson::MIN_POINTS {
            let msg = format!(
                "{name} partition has {} points (< {}); contributing an empty mesh",
                pts.len(),
                poisson::MIN_POINTS
            );
            log::warn!("{msg}");
            out.warnings.push(msg);
            return Ok(TriangleMesh::default());
        }
        let oriented = estimate_normals(pts, settings.k_normals, sensor_origins).stage("normals")?;
        poisson_reconstruct(&oriented, cfg).stage(name)
    };
    let ground_mesh = part("ground", &ground, &settings.coarse)?;
    let non_ground_mesh = part("non-ground", &rest, &settings.fine)?;
    out.mesh = ground_mesh.concat(&non_ground_mesh);
    out.ground = ground_mesh;
    out.non_ground = non_ground_mesh;
    Ok(out)
}
