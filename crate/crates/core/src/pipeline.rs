//! End-to-end ground-truth generation for the keyframes of a manifest:
//! aggregate → split ground → coarse-to-fine reconstruction → voxelize →
//! k-NN labeling.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::aggregate::{aggregate_window, check_sequence, interior_keyframes, window_range, world_to_ego, PosedFrame};
use crate::cloud::SemanticPointCloud;
use crate::error::{OccError, Result, StageExt};
use crate::grid::{GridSpec, LabelMap, OccupancyGrid};
use crate::io::{self, config::KeyframeSelection, PipelineConfig, PlyFormat, SequenceManifest};
use crate::label::{knn_label, KnnConfig};
use crate::recon::{coarse_to_fine_reconstruct, voxelize_mesh};
use crate::Point3;

#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    /// Writes `aggregated_<k>.ply`, `mesh_<k>.ply` and `occupancy_<k>.wocc`
    /// per keyframe when set.
    pub dump_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct KeyframeResult {
    pub keyframe: usize,
    pub grid: OccupancyGrid,
    /// Wall time per stage, in execution order.
    pub timings: Vec<(&'static str, Duration)>,
    pub warnings: Vec<String>,
    pub points: usize,
    pub triangles: usize,
}

/// Reads every frame of the manifest.
pub fn load_frames(manifest: &SequenceManifest) -> Result<Vec<PosedFrame>> {
    let frames: Vec<PosedFrame> = manifest
        .frames
        .par_iter()
        .zip(&manifest.poses)
        .enumerate()
        .map(|(i, (f, pose))| {
            let cloud = io::read_frame(&f.cloud, &f.labels, &manifest.remap)?;
            Ok(PosedFrame::new(cloud, *pose, f.timestamp, i as u32))
        })
        .collect::<Result<_>>()
        .stage("load")?;
    check_sequence(&frames).stage("load")?;
    Ok(frames)
}

/// Keyframe indices selected by the config.
pub fn select_keyframes(n_frames: usize, cfg: &PipelineConfig) -> Result<Vec<usize>> {
    let keys = match &cfg.keyframes {
        KeyframeSelection::All => (0..n_frames).collect(),
        KeyframeSelection::Interior => interior_keyframes(n_frames, cfg.window, cfg.window_offset),
        KeyframeSelection::List(list) => {
            if let Some(&bad) = list.iter().find(|&&k| k >= n_frames) {
                return Err(OccError::Config(format!(
                    "keyframe {bad} outside sequence of {n_frames} frames"
                )));
            }
            list.clone()
        }
    };
    if keys.is_empty() {
        return Err(OccError::Config("no keyframe selected".into()));
    }
    Ok(keys)
}

fn crop(cloud: &SemanticPointCloud, spec: &GridSpec, margin: f64) -> SemanticPointCloud {
    if margin < 0.0 {
        return cloud.clone();
    }
    let lo = spec.origin;
    let hi = spec.max_corner();
    let keep: Vec<usize> = cloud
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| (0..3).all(|a| p[a] >= lo[a] - margin && p[a] <= hi[a] + margin))
        .map(|(i, _)| i)
        .collect();
    cloud.select(&keep)
}

/// Window around `keyframe` in its ego frame, cropped to the grid, with
/// each frame's sensor origin in the same frame.
pub fn aggregate_keyframe(
    frames: &[PosedFrame],
    keyframe: usize,
    cfg: &PipelineConfig,
) -> Result<(SemanticPointCloud, HashMap<u32, Point3>)> {
    let range = window_range(frames.len(), keyframe, cfg.window, cfg.window_offset).stage("aggregate")?;
    let current = world_to_ego(&frames[keyframe]);
    let window = &frames[range];
    let aggregated = aggregate_window(window, &current, window.len()).stage("aggregate")?;
    let origins = window
        .iter()
        .map(|f| (f.frame_index, current.apply(&Point3::from(f.pose_world.translation()))))
        .collect();
    Ok((crop(&aggregated, &cfg.grid, cfg.crop_margin), origins))
}

/// Ground truth for one keyframe.
pub fn process_keyframe(
    frames: &[PosedFrame],
    keyframe: usize,
    cfg: &PipelineConfig,
    labels: &LabelMap,
    options: &PipelineOptions,
) -> Result<KeyframeResult> {
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &'static str, timings: &mut Vec<(&'static str, Duration)>| {
        timings.push((name, clock.elapsed()));
        clock = Instant::now();
    };

    let (cloud, origins) = aggregate_keyframe(frames, keyframe, cfg)?;
    lap("aggregate", &mut timings);

    let recon = coarse_to_fine_reconstruct(&cloud, labels, &cfg.recon_settings(), &origins).stage("reconstruct")?;
    lap("reconstruct", &mut timings);

    let occupancy = voxelize_mesh(&recon.mesh, &cfg.grid);
    lap("voxelize", &mut timings);

    let knn = KnnConfig {
        k: cfg.knn_k,
        max_radius: cfg.knn_max_radius,
    };
    let grid = knn_label(&occupancy, &cloud, &knn, labels).stage("label")?;
    lap("label", &mut timings);

    if let Some(dir) = &options.dump_dir {
        let stem = crate::synth::frame_stem(keyframe);
        let dump = || -> Result<()> {
            std::fs::create_dir_all(dir)?;
            io::write_ply_points(&dir.join(format!("aggregated_{stem}.ply")), &cloud, PlyFormat::BinaryLittleEndian)?;
            io::write_ply_mesh(&dir.join(format!("mesh_{stem}.ply")), &recon.mesh, PlyFormat::BinaryLittleEndian)?;
            io::write_grid(&dir.join(format!("occupancy_{stem}.wocc")), &occupancy)
        };
        dump().stage("dump")?;
        lap("dump", &mut timings);
    }

    Ok(KeyframeResult {
        keyframe,
        grid,
        timings,
        warnings: recon.warnings,
        points: cloud.len(),
        triangles: recon.mesh.triangles().len(),
    })
}

/// Runs every selected keyframe of the manifest. Keyframes are independent
/// and processed in parallel; results come back in keyframe order.
pub fn run_pipeline(manifest: &SequenceManifest, options: &PipelineOptions) -> Result<Vec<KeyframeResult>> {
    manifest.config.validate()?;
    let frames = load_frames(manifest)?;
    let keys = select_keyframes(frames.len(), &manifest.config)?;
    keys.par_iter()
        .map(|&k| process_keyframe(&frames, k, &manifest.config, &manifest.labels, options))
        .collect()
}

/// Output grid path of a keyframe.
pub fn grid_path(dir: &Path, keyframe: usize) -> PathBuf {
    dir.join(format!("grid_{}.wocc", crate::synth::frame_stem(keyframe)))
}
