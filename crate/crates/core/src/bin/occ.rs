//! Command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use occ_core::error::{OccError, Result, StageExt};
use occ_core::grid::{FeatureVolume, GridSpec, LabelMap};
use occ_core::io::{self, PlyFormat, SequenceManifest};
use occ_core::label::{knn_label, KnnConfig};
use occ_core::metrics::EvalReport;
use occ_core::offmath::{self, ConvBnReluWeights, LossConfig};
use occ_core::pipeline::{self, PipelineOptions};
use occ_core::recon::{coarse_to_fine_reconstruct, voxelize_mesh};
use occ_core::synth::{self, generate_synthetic, SyntheticScene};
use occ_core::Point3;

#[derive(Parser)]
#[command(name = "occ", version, about = "Dense semantic occupancy from posed, labeled LiDAR sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Aggregate a keyframe's window into one labeled cloud (PLY).
    Aggregate {
        #[command(flatten)]
        key: KeyframeArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ascii: bool,
    },
    /// Coarse-to-fine mesh of a keyframe's window (PLY).
    Reconstruct {
        #[command(flatten)]
        key: KeyframeArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ascii: bool,
    },
    /// Voxelize a PLY mesh into an occupancy grid (occupied voxels = 1).
    Voxelize {
        #[arg(long)]
        mesh: PathBuf,
        /// Takes the output lattice from this manifest; default lattice otherwise.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label the occupied voxels of a grid from a keyframe's window.
    Label {
        #[command(flatten)]
        key: KeyframeArgs,
        #[arg(long)]
        occupancy: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the whole pipeline; writes grid_<keyframe>.wocc per keyframe.
    Pipeline {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also dump aggregated clouds, meshes and unlabeled grids here.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Compare a predicted grid with ground truth.
    ///
    /// The key=value report has lines `iou`, `miou`, `strict_n_classes`,
    /// `compared_voxels`, `ignored_voxels` and `iou.<class>` (`nan` when the
    /// class is absent). The JSON report has the same fields, with per-class
    /// entries under `classes` as {id, name, iou|null}.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        label_map: Option<PathBuf>,
        /// Average over all classes, absent ones counting as 0.
        #[arg(long)]
        strict_n_classes: bool,
        #[arg(long, value_enum, default_value_t = ReportFormat::Kv)]
        format: ReportFormat,
        /// Writes the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic sequence with analytic ground truth and a manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Surface samples per frame before visibility culling.
        #[arg(long, default_value_t = 60_000)]
        points: usize,
        /// Gaussian position noise in meters.
        #[arg(long, default_value_t = 0.01)]
        sigma: f64,
    },
    /// Voxel-space kernels on dumped feature volumes (WFEA files).
    Kernels {
        #[command(subcommand)]
        op: KernelOp,
    },
}

#[derive(Args)]
struct KeyframeArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    keyframe: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Kv,
    Json,
}

#[derive(Subcommand)]
enum KernelOp {
    /// Re-express a volume observed at pose `src` in the frame of pose `tgt`.
    Align {
        #[arg(long)]
        input: PathBuf,
        /// KITTI pose file; `src` and `tgt` are line indices.
        #[arg(long)]
        poses: PathBuf,
        #[arg(long)]
        src: usize,
        #[arg(long)]
        tgt: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Concatenate volumes along channels, in the order given.
    Concat {
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Conv3d-BN-ReLU with weights from a JSON file.
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sigmoid-gated fusion of image and LiDAR volumes.
    Fuse {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        lidar: PathBuf,
        #[arg(long)]
        gate: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Occupancy mask of a grid as a 1-channel volume.
    Mask {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Masked cosine distillation loss (printed as key=value).
    Distill {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        lidar: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        sign: f64,
    },
    /// Cross-entropy of logits against a grid (printed as key=value).
    CrossEntropy {
        #[arg(long)]
        logits: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
}

fn load_manifest(path: &Path) -> Result<SequenceManifest> {
    SequenceManifest::load(path).stage("manifest")
}

fn keyframe_cloud(key: &KeyframeArgs) -> Result<(SequenceManifest, occ_core::cloud::SemanticPointCloud, std::collections::HashMap<u32, Point3>)> {
    let m = load_manifest(&key.manifest)?;
    let frames = pipeline::load_frames(&m)?;
    if key.keyframe >= frames.len() {
        return Err(OccError::Config(format!(
            "keyframe {} outside sequence of {} frames",
            key.keyframe,
            frames.len()
        )));
    }
    let (cloud, origins) = pipeline::aggregate_keyframe(&frames, key.keyframe, &m.config)?;
    Ok((m, cloud, origins))
}

fn ply_format(ascii: bool) -> PlyFormat {
    if ascii {
        PlyFormat::Ascii
    } else {
        PlyFormat::BinaryLittleEndian
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Aggregate { key, out, ascii } => {
            let (_, cloud, _) = keyframe_cloud(&key)?;
            io::write_ply_points(&out, &cloud, ply_format(ascii)).stage("write")?;
            println!("points={}", cloud.len());
        }
        Command::Reconstruct { key, out, ascii } => {
            let (m, cloud, origins) = keyframe_cloud(&key)?;
            let r = coarse_to_fine_reconstruct(&cloud, &m.labels, &m.config.recon_settings(), &origins)
                .stage("reconstruct")?;
            io::write_ply_mesh(&out, &r.mesh, ply_format(ascii)).stage("write")?;
            println!("vertices={}\ntriangles={}", r.mesh.vertices().len(), r.mesh.triangles().len());
        }
        Command::Voxelize { mesh, manifest, out } => {
            let spec = match manifest {
                Some(p) => load_manifest(&p)?.config.grid,
                None => GridSpec::default(),
            };
            let mesh = io::read_ply_mesh(&mesh).stage("read")?;
            let grid = voxelize_mesh(&mesh, &spec);
            io::write_grid(&out, &grid).stage("write")?;
            println!("occupied={}", grid.occupied_count());
        }
        Command::Label { key, occupancy, out } => {
            let (m, cloud, _) = keyframe_cloud(&key)?;
            let occ = io::read_grid(&occupancy).stage("read")?;
            let cfg = KnnConfig {
                k: m.config.knn_k,
                max_radius: m.config.knn_max_radius,
            };
            let grid = knn_label(&occ, &cloud, &cfg, &m.labels).stage("label")?;
            io::write_grid(&out, &grid).stage("write")?;
            println!("occupied={}", grid.occupied_count());
        }
        Command::Pipeline { manifest, out, dump } => {
            let m = load_manifest(&manifest)?;
            let results = pipeline::run_pipeline(&m, &PipelineOptions { dump_dir: dump })?;
            std::fs::create_dir_all(&out)?;
            for r in &results {
                io::write_grid(&pipeline::grid_path(&out, r.keyframe), &r.grid).stage("write")?;
                let stages: Vec<String> = r
                    .timings
                    .iter()
                    .map(|(s, d)| format!("{s}={:.3}s", d.as_secs_f64()))
                    .collect();
                println!(
                    "keyframe={} points={} triangles={} occupied={} {}",
                    r.keyframe,
                    r.points,
                    r.triangles,
                    r.grid.occupied_count(),
                    stages.join(" ")
                );
                for w in &r.warnings {
                    log::warn!("keyframe {}: {w}", r.keyframe);
                }
            }
        }
        Command::Eval {
            pred,
            gt,
            label_map,
            strict_n_classes,
            format,
            out,
        } => {
            let labels = match label_map {
                Some(p) => io::read_label_map(&p).stage("read")?.labels,
                None => LabelMap::default(),
            };
            let pred = io::read_grid(&pred).stage("read")?;
            let gt = io::read_grid(&gt).stage("read")?;
            let report = EvalReport::from_grids(&pred, &gt, &labels, strict_n_classes).stage("eval")?;
            let text = match format {
                ReportFormat::Kv => report.to_key_value(),
                ReportFormat::Json => report.to_json() + "\n",
            };
            match out {
                Some(p) => io::write_atomic(&p, text.as_bytes()).stage("write")?,
                None => print!("{text}"),
            }
        }
        Command::Synth {
            out,
            seed,
            points,
            sigma,
        } => {
            let scene = SyntheticScene::default();
            let data = generate_synthetic(&scene, points, sigma, seed).stage("synth")?;
            synth::write_sequence(&out, &scene, &data, &[]).stage("write")?;
            println!(
                "frames={}\nkeyframe={}\ngt_occupied={}",
                data.frames.len(),
                scene.keyframe,
                data.gt.occupied_count()
            );
        }
        Command::Kernels { op } => run_kernel(op).stage("kernels")?,
    }
    Ok(())
}

fn run_kernel(op: KernelOp) -> Result<()> {
    let read = |p: &Path| io::read_features(p);
    match op {
        KernelOp::Align {
            input,
            poses,
            src,
            tgt,
            out,
        } => {
            let poses = io::read_poses(&poses)?;
            let pose = |i: usize| {
                poses
                    .get(i)
                    .copied()
                    .ok_or_else(|| OccError::Config(format!("pose {i} not in file ({} poses)", poses.len())))
            };
            let v = offmath::align_volume(&read(&input)?, &pose(src)?, &pose(tgt)?);
            io::write_features(&out, &v)?;
        }
        KernelOp::Concat { inputs, out } => {
            let vols: Vec<FeatureVolume> = inputs.iter().map(|p| read(p)).collect::<Result<_>>()?;
            io::write_features(&out, &offmath::temporal_concat(&vols)?)?;
        }
        KernelOp::Encode { input, weights, out } => {
            let text = std::fs::read_to_string(&weights)?;
            let w: ConvBnReluWeights = serde_json::from_str(&text)
                .map_err(|e| OccError::malformed(&weights, e.to_string()))?;
            io::write_features(&out, &offmath::voxel_encoder_forward(&read(&input)?, &w)?)?;
        }
        KernelOp::Fuse {
            image,
            lidar,
            gate,
            out,
        } => {
            let v = offmath::adaptive_fuse(&read(&image)?, &read(&lidar)?, &read(&gate)?)?;
            io::write_features(&out, &v)?;
        }
        KernelOp::Mask { gt, out } => {
            let mask = offmath::occupancy_mask(&io::read_grid(&gt)?);
            let data = mask.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
            io::write_features(&out, &FeatureVolume::from_data(mask.spec, 1, data)?)?;
        }
        KernelOp::Distill { image, lidar, gt, sign } => {
            let mask = offmath::occupancy_mask(&io::read_grid(&gt)?);
            let (fi, fl) = (read(&image)?, read(&lidar)?);
            let cfg = LossConfig {
                distill_sign: sign,
                ..LossConfig::default()
            };
            println!("masked_voxels={}", mask.count());
            println!("raw={}", offmath::masked_cosine_mean(&fi, &fl, &mask)?);
            println!("loss={}", offmath::distill_loss(&fi, &fl, &mask, &cfg)?);
        }
        KernelOp::CrossEntropy { logits, gt } => {
            let loss = offmath::cross_entropy_loss(&read(&logits)?, &io::read_grid(&gt)?)?;
            println!("loss={loss}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
