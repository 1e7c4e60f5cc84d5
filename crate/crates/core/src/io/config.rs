//! Flat `key = value` configuration, the label-map file and the sequence
//! manifest.
//!
//! Manifest keys (relative paths resolve against the manifest directory):
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `poses` | required | KITTI pose file, one line per frame |
//! | `frame_list` | required | lines `cloud.bin labels.label [timestamp]` |
//! | `label_map` | built-in 7 classes | label-map file |
//! | `label_remap` | `rellis` | `rellis` or `identity` when no label-map file is given |
//! | `ground_classes` | from label map | comma-separated class names |
//! | `window` | 400 | frames aggregated per keyframe |
//! | `window_offset` | `centered` | `centered`, `trailing` or `leading` |
//! | `keyframes` | `interior` | `interior`, `all` or a comma-separated index list |
//! | `depth_coarse`, `depth_fine` | 8, 13 | Poisson lattice depths |
//! | `knn_k` | 15 | labeling neighbors |
//! | `knn_max_radius` | none | labeling radius cut in meters |
//! | `k_normals` | 16 | normal-estimation neighbors |
//! | `splat_radius` | 2 | Poisson band half-width in cells |
//! | `cg_tol`, `cg_max_iters` | 1e-8, 2000 | solver settings |
//! | `lambda` | 0.8 | distillation weight |
//! | `grid_dims`, `voxel_size`, `grid_origin` | 100,100,40 / 0.2 / 0,-10,-2 | output lattice |
//! | `crop_margin` | 2 | meters kept around the grid before reconstruction; negative keeps everything |
//! | `strict_n_classes` | false | mIoU averages over all classes |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::aggregate::WindowOffset;
use crate::error::{OccError, Result};
use crate::grid::{GridSpec, LabelMap};
use crate::pose::RigidPose;
use crate::recon::{PoissonConfig, ReconSettings};
use crate::Point3;

use super::poses::read_poses;
use super::scan::LabelRemap;

/// Parsed `key = value` pairs with the line each came from. `#` starts a
/// comment; duplicate keys are an error.
pub fn parse_key_values(text: &str, path: &Path) -> Result<BTreeMap<String, (String, usize)>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let err = |reason: String| OccError::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            reason,
        };
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| err(format!("expected 'key = value', found '{body}'")))?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(err("empty key".into()));
        }
        if out.insert(key.clone(), (v.trim().to_string(), n + 1)).is_some() {
            return Err(err(format!("duplicate key '{key}'")));
        }
    }
    Ok(out)
}

/// Classes, ground flags and raw-id remapping read from a label-map file:
///
/// ```text
/// class grass ground
/// class tree
/// map 3 grass
/// ```
///
/// Classes get ids `1..=N` in file order. Without `map` lines raw ids equal
/// class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMapFile {
    pub labels: LabelMap,
    pub remap: LabelRemap,
}

pub fn read_label_map(path: &Path) -> Result<LabelMapFile> {
    parse_label_map(&super::read_text(path)?, path)
}

pub fn parse_label_map(text: &str, path: &Path) -> Result<LabelMapFile> {
    let mut names: Vec<String> = Vec::new();
    let mut ground: Vec<String> = Vec::new();
    let mut maps: Vec<(u16, String, usize)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let err = |reason: String| OccError::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            reason,
        };
        let tok: Vec<&str> = line.split('#').next().unwrap_or("").split_whitespace().collect();
        match tok.as_slice() {
            [] => {}
            ["class", name] => names.push(name.to_string()),
            ["class", name, "ground"] => {
                names.push(name.to_string());
                ground.push(name.to_string());
            }
            ["map", raw, name] => {
                let raw = raw
                    .parse::<u16>()
                    .map_err(|_| err(format!("raw id '{raw}' is not a 16-bit integer")))?;
                maps.push((raw, name.to_string(), n + 1));
            }
            _ => return Err(err(format!("unrecognized line '{}'", line.trim()))),
        }
    }
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let ground_refs: Vec<&str> = ground.iter().map(String::as_str).collect();
    let labels = LabelMap::new(&name_refs, &ground_refs)?;
    let remap = if maps.is_empty() {
        LabelRemap::identity(&labels)
    } else {
        let mut r = LabelRemap::from_pairs([]);
        for (raw, name, line) in maps {
            let id = labels.id_of(&name).ok_or_else(|| OccError::Parse {
                path: path.to_path_buf(),
                line,
                reason: format!("unknown class '{name}'"),
            })?;
            r.insert(raw, id);
        }
        r
    };
    Ok(LabelMapFile { labels, remap })
}

/// Which frames receive an output grid.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum KeyframeSelection {
    /// Frames whose window fits inside the sequence without shifting.
    #[default]
    Interior,
    All,
    List(Vec<usize>),
}

impl FromStr for KeyframeSelection {
    type Err = OccError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "interior" => Ok(Self::Interior),
            "all" => Ok(Self::All),
            list => parse_list::<usize>(list).map(Self::List),
        }
    }
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| OccError::Config(format!("bad list element '{}'", t.trim())))
        })
        .collect()
}

fn parse_vec3(s: &str) -> Result<[f64; 3]> {
    let v = parse_list::<f64>(s)?;
    v.as_slice()
        .try_into()
        .map_err(|_| OccError::Config(format!("expected 3 comma-separated values, found '{s}'")))
}

/// Pipeline parameters with their paper defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub window: usize,
    pub window_offset: WindowOffset,
    pub keyframes: KeyframeSelection,
    pub depth_coarse: u32,
    pub depth_fine: u32,
    pub knn_k: usize,
    pub knn_max_radius: Option<f64>,
    pub k_normals: usize,
    pub splat_radius: f64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    pub lambda: f64,
    pub grid: GridSpec,
    pub crop_margin: f64,
    pub strict_n_classes: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let poisson = PoissonConfig::default();
        Self {
            window: 400,
            window_offset: WindowOffset::Centered,
            keyframes: KeyframeSelection::Interior,
            depth_coarse: 8,
            depth_fine: 13,
            knn_k: 15,
            knn_max_radius: None,
            k_normals: 16,
            splat_radius: poisson.splat_radius,
            cg_tol: poisson.cg_tol,
            cg_max_iters: poisson.cg_max_iters,
            lambda: 0.8,
            grid: GridSpec::default(),
            crop_margin: 2.0,
            strict_n_classes: false,
        }
    }
}

impl PipelineConfig {
    pub fn recon_settings(&self) -> ReconSettings {
        let poisson = |depth| PoissonConfig {
            depth,
            cg_max_iters: self.cg_max_iters,
            cg_tol: self.cg_tol,
            splat_radius: self.splat_radius,
        };
        ReconSettings {
            coarse: poisson(self.depth_coarse),
            fine: poisson(self.depth_fine),
            k_normals: self.k_normals,
        }
    }

    /// Applies one key; returns `false` for keys that are not pipeline
    /// settings.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse::<T>()
                .map_err(|_| OccError::Config(format!("{key}: cannot parse '{v}'")))
        }
        match key {
            "window" => self.window = num(key, value)?,
            "window_offset" => self.window_offset = value.parse()?,
            "keyframes" => self.keyframes = value.parse()?,
            "depth_coarse" => self.depth_coarse = num(key, value)?,
            "depth_fine" => self.depth_fine = num(key, value)?,
            "knn_k" => self.knn_k = num(key, value)?,
            "knn_max_radius" => self.knn_max_radius = Some(num(key, value)?),
            "k_normals" => self.k_normals = num(key, value)?,
            "splat_radius" => self.splat_radius = num(key, value)?,
            "cg_tol" => self.cg_tol = num(key, value)?,
            "cg_max_iters" => self.cg_max_iters = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "strict_n_classes" => self.strict_n_classes = num(key, value)?,
            "crop_margin" => self.crop_margin = num(key, value)?,
            "grid_dims" => {
                let d = parse_list::<usize>(value)?;
                self.grid.dims = d
                    .as_slice()
                    .try_into()
                    .map_err(|_| OccError::Config(format!("grid_dims needs 3 values, found '{value}'")))?;
            }
            "voxel_size" => self.grid.voxel_size = num(key, value)?,
            "grid_origin" => self.grid.origin = Point3::from(parse_vec3(value)?),
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(OccError::Config("window must be positive".into()));
        }
        if self.knn_k == 0 {
            return Err(OccError::Config("knn_k must be positive".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(OccError::Config("lambda must be finite and non-negative".into()));
        }
        self.grid.validate().map_err(|e| OccError::Config(format!("grid: {e}")))?;
        let s = self.recon_settings();
        s.coarse.validate().map_err(|e| OccError::Config(e.to_string()))?;
        s.fine.validate().map_err(|e| OccError::Config(e.to_string()))?;
        if self.depth_coarse > self.depth_fine {
            return Err(OccError::Config(format!(
                "depth_coarse {} exceeds depth_fine {}",
                self.depth_coarse, self.depth_fine
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameEntry {
    pub cloud: PathBuf,
    pub labels: PathBuf,
    pub timestamp: f64,
}

/// A loaded manifest: frame files, poses, label map and settings.
#[derive(Debug, Clone)]
pub struct SequenceManifest {
    pub path: PathBuf,
    pub frames: Vec<FrameEntry>,
    pub poses: Vec<RigidPose>,
    pub labels: LabelMap,
    pub remap: LabelRemap,
    pub config: PipelineConfig,
}

/// Frame timestamps default to `index / 10` seconds.
pub const DEFAULT_FRAME_RATE: f64 = 10.0;

impl SequenceManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = super::read_text(path)?;
        let kv = parse_key_values(&text, path)?;
        let root = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let resolve = |p: &str| -> PathBuf {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                root.join(p)
            }
        };
        let at = |line: usize, e: OccError| OccError::Parse {
            path: path.to_path_buf(),
            line,
            reason: e.to_string(),
        };
        let mut config = PipelineConfig::default();
        let mut poses_path = None;
        let mut frame_list = None;
        let mut label_map = None;
        let mut remap_kind = None;
        let mut ground = None;
        for (key, (value, line)) in &kv {
            match key.as_str() {
                "poses" => poses_path = Some(resolve(value)),
                "frame_list" => frame_list = Some(resolve(value)),
                "label_map" => label_map = Some(resolve(value)),
                "label_remap" => remap_kind = Some((value.clone(), *line)),
                "ground_classes" => ground = Some((value.clone(), *line)),
                _ => {
                    if !config.set(key, value).map_err(|e| at(*line, e))? {
                        return Err(at(*line, OccError::Config(format!("unknown key '{key}'"))));
                    }
                }
            }
        }
        config.validate()?;
        let missing = |k: &str| OccError::Config(format!("{}: missing required key '{k}'", path.display()));
        let poses_path = poses_path.ok_or_else(|| missing("poses"))?;
        let frame_list = frame_list.ok_or_else(|| missing("frame_list"))?;

        let (mut labels, remap) = match label_map {
            Some(p) => {
                let f = read_label_map(&p)?;
                (f.labels, f.remap)
            }
            None => {
                let labels = LabelMap::default();
                let remap = match remap_kind.as_ref().map(|(v, l)| (v.as_str(), *l)) {
                    None | Some(("rellis", _)) => LabelRemap::rellis(&labels),
                    Some(("identity", _)) => LabelRemap::identity(&labels),
                    Some((other, line)) => {
                        return Err(at(line, OccError::Config(format!("unknown label_remap '{other}'"))))
                    }
                };
                (labels, remap)
            }
        };
        if let Some((value, line)) = ground {
            let names: Vec<&str> = value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
            labels = labels.with_ground(&names).map_err(|e| at(line, e))?;
        }

        let frames = parse_frame_list(&super::read_text(&frame_list)?, &frame_list)?;
        if frames.is_empty() {
            return Err(OccError::Pairing(format!("{} lists no frames", frame_list.display())));
        }
        for f in &frames {
            for p in [&f.cloud, &f.labels] {
                if !p.is_file() {
                    return Err(OccError::Pairing(format!("missing frame file {}", p.display())));
                }
            }
        }
        let poses = read_poses(&poses_path)?;
        if poses.len() != frames.len() {
            return Err(OccError::Pairing(format!(
                "{} poses for {} frames",
                poses.len(),
                frames.len()
            )));
        }
        Ok(Self {
            path: path.to_path_buf(),
            frames,
            poses,
            labels,
            remap,
            config,
        })
    }
}

/// Lines `cloud labels [timestamp]`, paths relative to the list file.
pub fn parse_frame_list(text: &str, path: &Path) -> Result<Vec<FrameEntry>> {
    let root = path.parent().unwrap_or(Path::new(""));
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let tok: Vec<&str> = line.split('#').next().unwrap_or("").split_whitespace().collect();
        let err = |reason: String| OccError::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            reason,
        };
        let (cloud, labels, ts) = match tok.as_slice() {
            [] => continue,
            [c, l] => (c, l, None),
            [c, l, t] => (
                c,
                l,
                Some(t.parse::<f64>().map_err(|_| err(format!("bad timestamp '{t}'")))?),
            ),
            _ => return Err(err("expected 'cloud labels [timestamp]'".into())),
        };
        let timestamp = ts.unwrap_or(out.len() as f64 / DEFAULT_FRAME_RATE);
        out.push(FrameEntry {
            cloud: root.join(cloud),
            labels: root.join(labels),
            timestamp,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn key_values() {
        let p = Path::new("c.cfg");
        let kv = parse_key_values("# hi\nwindow = 40\n\n knn_k=3 # k\n", p).unwrap();
        assert_eq!(kv["window"], ("40".to_string(), 2));
        assert_eq!(kv["knn_k"].0, "3");
        assert!(matches!(parse_key_values("a = 1\nb\n", p), Err(OccError::Parse { line: 2, .. })));
        assert!(matches!(parse_key_values("a = 1\na = 2\n", p), Err(OccError::Parse { line: 2, .. })));
    }

    #[test]
    fn config_keys() {
        let mut c = PipelineConfig::default();
        assert_eq!((c.window, c.depth_coarse, c.depth_fine, c.knn_k, c.lambda), (400, 8, 13, 15, 0.8));
        assert!(c.set("grid_dims", "10, 20, 5").unwrap());
        assert!(c.set("keyframes", "1,4").unwrap());
        assert!(!c.set("nonsense", "1").unwrap());
        assert!(c.set("knn_k", "x").is_err());
        assert_eq!(c.grid.dims, [10, 20, 5]);
        assert_eq!(c.keyframes, KeyframeSelection::List(vec![1, 4]));
        c.depth_coarse = 9;
        c.depth_fine = 8;
        assert!(c.validate().is_err());
    }

    #[test]
    fn label_map_file() {
        let p = Path::new("labels.txt");
        let f = parse_label_map("class grass ground\nclass tree\nmap 3 grass\nmap 4 tree\n", p).unwrap();
        assert_eq!(f.labels.num_classes(), 2);
        assert!(f.labels.is_ground(1));
        assert_eq!((f.remap.apply(3), f.remap.apply(4), f.remap.apply(1)), (1, 2, 255));
        let plain = parse_label_map("class a\nclass b\n", p).unwrap();
        assert_eq!(plain.remap.apply(2), 2);
        assert!(matches!(parse_label_map("class a\nmap 1 zzz\n", p), Err(OccError::Parse { line: 2, .. })));
        assert!(parse_label_map("klass a\n", p).is_err());
    }

    #[test]
    fn frame_list_timestamps() {
        let p = Path::new("/data/frames.txt");
        let f = parse_frame_list("a.bin a.label\nb.bin b.label 7.5\nc.bin c.label\n", p).unwrap();
        assert_eq!(f[0].timestamp, 0.0);
        assert_eq!(f[1].timestamp, 7.5);
        assert_eq!(f[2].timestamp, 0.2);
        assert_eq!(f[0].cloud, Path::new("/data/a.bin"));
        assert!(parse_frame_list("a b c d\n", p).is_err());
    }

    #[test]
    fn manifest_errors() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.cfg");
        fs::write(dir.path().join("frames.txt"), "").unwrap();
        fs::write(dir.path().join("poses.txt"), "").unwrap();
        fs::write(&m, "poses = poses.txt\nframe_list = frames.txt\n").unwrap();
        assert!(matches!(SequenceManifest::load(&m), Err(OccError::Pairing(_))));
        fs::write(&m, "poses = poses.txt\nframe_list = frames.txt\nwindw = 3\n").unwrap();
        assert!(matches!(SequenceManifest::load(&m), Err(OccError::Parse { line: 3, .. })));
        fs::write(&m, "poses = poses.txt\n").unwrap();
        assert!(matches!(SequenceManifest::load(&m), Err(OccError::Config(_))));
    }
}
