//! KITTI pose text: one row-major 3×4 `[R | t]` per line, 12 reals.

use std::path::Path;

use nalgebra::Matrix3;

use crate::error::{OccError, Result};
use crate::pose::{matrix_from_3x4, nearest_rotation, RigidPose};

use super::write_atomic;

/// Rotation blocks deviating from orthonormal by more than this are
/// rejected; smaller deviations above round-off are projected back.
pub const POSE_FILE_TOL: f64 = 1e-3;
const ROUND_OFF: f64 = 1e-6;

pub fn read_poses(path: &Path) -> Result<Vec<RigidPose>> {
    let text = super::read_text(path)?;
    let (poses, warnings) = parse_poses(&text, path)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(poses)
}

/// Parses pose lines; blank lines and `#` comments are skipped. Returns the
/// poses and one warning per re-orthonormalized line.
pub fn parse_poses(text: &str, path: &Path) -> Result<(Vec<RigidPose>, Vec<String>)> {
    let mut poses = Vec::new();
    let mut warnings = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let err = |reason: String| OccError::Parse {
            path: path.to_path_buf(),
            line: line_no,
            reason,
        };
        let values: Vec<f64> = body
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(format!("'{t}' is not a number"))))
            .collect::<Result<_>>()?;
        let rows: [f64; 12] = values
            .as_slice()
            .try_into()
            .map_err(|_| err(format!("expected 12 values, found {}", values.len())))?;
        let mut m = matrix_from_3x4(&rows);
        let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into();
        let dev = (r.transpose() * r - Matrix3::identity()).abs().max();
        if !dev.is_finite() || dev > POSE_FILE_TOL || r.determinant() <= 0.0 {
            return Err(err(format!("rotation block is not a rotation (max |RᵀR - I| = {dev:.3e})")));
        }
        if dev > ROUND_OFF {
            warnings.push(format!(
                "{}:{line_no}: re-orthonormalized rotation (max |RᵀR - I| = {dev:.3e})",
                path.display()
            ));
            m.fixed_view_mut::<3, 3>(0, 0).copy_from(&nearest_rotation(&r));
        }
        poses.push(RigidPose::new(m).map_err(|e| err(e.to_string()))?);
    }
    Ok((poses, warnings))
}

pub fn write_poses(path: &Path, poses: &[RigidPose]) -> Result<()> {
    let mut out = String::new();
    for p in poses {
        let rows = p.to_rows_3x4();
        let line: Vec<String> = rows.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}
