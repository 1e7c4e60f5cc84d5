//! File formats: point and label scans, KITTI pose text, the WOCC grid file,
//! feature-volume dumps, PLY meshes and key=value configuration.
//!
//! Every writer goes through [`write_atomic`], so a failed command never
//! leaves a partial output file behind.

pub mod config;
pub mod grid_file;
pub mod ply;
pub mod poses;
pub mod scan;

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{OccError, Result};

pub use config::{parse_key_values, read_label_map, LabelMapFile, PipelineConfig, SequenceManifest};
pub use grid_file::{decode_grid, encode_grid, read_features, read_grid, write_features, write_grid};
pub use ply::{read_ply_mesh, write_ply_mesh, write_ply_points, PlyFormat};
pub use poses::{parse_poses, read_poses, write_poses};
pub use scan::{read_frame, read_labels, read_point_bin, write_labels, write_point_bin, LabelRemap};

fn file_error(path: &Path) -> impl FnOnce(std::io::Error) -> OccError + '_ {
    move |source| OccError::File {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(file_error(path))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(file_error(path))
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::env::current_dir()?,
    };
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(file_error(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_and_cleans_up() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_atomic(&dir.path().join("missing/x"), b"").is_err());
    }
}
