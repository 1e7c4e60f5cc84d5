//! Synthetic scenes with analytic ground truth.
//!
//! Primitives live in a world frame with z up. A sensor circles the scene
//! center, facing it, and each frame samples the primitive surfaces it can
//! see (outward normal toward the sensor). Ground truth marks every voxel
//! whose closed box touches a primitive surface; later primitives override
//! earlier ones.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::aggregate::PosedFrame;
use crate::cloud::SemanticPointCloud;
use crate::error::{OccError, Result};
use crate::grid::{GridSpec, OccupancyGrid, NOISE};
use crate::io;
use crate::pose::RigidPose;
use crate::Point3;

/// Surface primitives. Every shape is yaw-symmetric or carries its own yaw so
/// it stays the same kind of shape in any yaw-only ego frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    /// Horizontal rectangle at height `z`.
    Plane { z: f64, center: [f64; 2], half: [f64; 2], yaw: f64 },
    Sphere { center: Point3, radius: f64 },
    /// Vertical closed cylinder standing on `base` (bottom-cap center).
    Cylinder { base: Point3, radius: f64, height: f64 },
    /// Box rotated by `yaw` about z.
    Box { center: Point3, half: Vector3<f64>, yaw: f64 },
}

fn rot2(yaw: f64) -> nalgebra::Matrix2<f64> {
    let (s, c) = yaw.sin_cos();
    nalgebra::Matrix2::new(c, -s, s, c)
}

/// Closed overlap of an axis-aligned rectangle and a rectangle rotated by
/// `yaw`, by separating axes.
fn rects_overlap(lo: Vector2<f64>, hi: Vector2<f64>, center: Vector2<f64>, half: [f64; 2], yaw: f64) -> bool {
    let r = rot2(yaw);
    let axes = [Vector2::x(), Vector2::y(), r.column(0).into(), r.column(1).into()];
    let aabb = [lo, Vector2::new(hi.x, lo.y), hi, Vector2::new(lo.x, hi.y)];
    let obb: Vec<Vector2<f64>> = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
        .iter()
        .map(|&(a, b)| center + r * Vector2::new(a * half[0], b * half[1]))
        .collect();
    axes.iter().all(|ax: &Vector2<f64>| {
        let (a0, a1) = aabb.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(m, n), p| {
            let d = p.dot(ax);
            (m.min(d), n.max(d))
        });
        let (b0, b1) = obb.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(m, n), p| {
            let d = p.dot(ax);
            (m.min(d), n.max(d))
        });
        a0 <= b1 && b0 <= a1
    })
}

fn dist2_to_rect(p: Vector2<f64>, lo: Vector2<f64>, hi: Vector2<f64>) -> f64 {
    let dx = (lo.x - p.x).max(0.0).max(p.x - hi.x);
    let dy = (lo.y - p.y).max(0.0).max(p.y - hi.y);
    dx * dx + dy * dy
}

impl Primitive {
    /// Same shape expressed through `pose` (which must be a yaw-only rigid
    /// transform).
    pub fn transformed(&self, pose: &RigidPose) -> Result<Primitive> {
        let r = pose.rotation();
        if (r[(2, 2)] - 1.0).abs() > 1e-9 {
            return Err(OccError::Precondition("synthetic scenes need yaw-only poses".into()));
        }
        let dyaw = r[(1, 0)].atan2(r[(0, 0)]);
        Ok(match *self {
            Primitive::Plane { z, center, half, yaw } => {
                let c = pose.apply(&Point3::new(center[0], center[1], z));
                Primitive::Plane {
                    z: c.z,
                    center: [c.x, c.y],
                    half,
                    yaw: yaw + dyaw,
                }
            }
            Primitive::Sphere { center, radius } => Primitive::Sphere {
                center: pose.apply(&center),
                radius,
            },
            Primitive::Cylinder { base, radius, height } => Primitive::Cylinder {
                base: pose.apply(&base),
                radius,
                height,
            },
            Primitive::Box { center, half, yaw } => Primitive::Box {
                center: pose.apply(&center),
                half,
                yaw: yaw + dyaw,
            },
        })
    }

    pub fn area(&self) -> f64 {
        match *self {
            Primitive::Plane { half, .. } => 4.0 * half[0] * half[1],
            Primitive::Sphere { radius, .. } => 4.0 * PI * radius * radius,
            Primitive::Cylinder { radius, height, .. } => 2.0 * PI * radius * (radius + height),
            Primitive::Box { half, .. } => 8.0 * (half.x * half.y + half.y * half.z + half.x * half.z),
        }
    }

    /// Closed point-in-solid test; planes have no interior.
    pub fn contains(&self, p: &Point3) -> bool {
        match *self {
            Primitive::Plane { .. } => false,
            Primitive::Sphere { center, radius } => (p - center).norm_squared() <= radius * radius,
            Primitive::Cylinder { base, radius, height } => {
                let d = p - base;
                d.z >= 0.0 && d.z <= height && d.xy().norm_squared() <= radius * radius
            }
            Primitive::Box { center, half, yaw } => {
                let d = rot2(-yaw) * (p - center).xy();
                d.x.abs() <= half.x && d.y.abs() <= half.y && (p.z - center.z).abs() <= half.z
            }
        }
    }

    fn strictly_inside(&self, p: &Point3) -> bool {
        match *self {
            Primitive::Plane { .. } => false,
            Primitive::Sphere { center, radius } => (p - center).norm_squared() < radius * radius,
            Primitive::Cylinder { base, radius, height } => {
                let d = p - base;
                d.z > 0.0 && d.z < height && d.xy().norm_squared() < radius * radius
            }
            Primitive::Box { center, half, yaw } => {
                let d = rot2(-yaw) * (p - center).xy();
                d.x.abs() < half.x && d.y.abs() < half.y && (p.z - center.z).abs() < half.z
            }
        }
    }

    fn touches_solid(&self, lo: &Point3, hi: &Point3) -> bool {
        match *self {
            Primitive::Plane { .. } => false,
            Primitive::Sphere { center, radius } => {
                let d2: f64 = (0..3)
                    .map(|a| {
                        let d = (lo[a] - center[a]).max(0.0).max(center[a] - hi[a]);
                        d * d
                    })
                    .sum();
                d2 <= radius * radius
            }
            Primitive::Cylinder { base, radius, height } => {
                lo.z <= base.z + height
                    && base.z <= hi.z
                    && dist2_to_rect(base.xy().coords, lo.xy().coords, hi.xy().coords) <= radius * radius
            }
            Primitive::Box { center, half, yaw } => {
                lo.z <= center.z + half.z
                    && center.z - half.z <= hi.z
                    && rects_overlap(lo.xy().coords, hi.xy().coords, center.xy().coords, [half.x, half.y], yaw)
            }
        }
    }

    /// Whether the closed box `[lo, hi]` touches the surface.
    pub fn touches_surface(&self, lo: &Point3, hi: &Point3) -> bool {
        if let Primitive::Plane { z, center, half, yaw } = *self {
            return lo.z <= z
                && z <= hi.z
                && rects_overlap(lo.xy().coords, hi.xy().coords, Vector2::from(center), half, yaw);
        }
        if !self.touches_solid(lo, hi) {
            return false;
        }
        // a convex solid's box misses the surface only when every corner is interior
        !(0..8).all(|c| {
            let corner = Point3::new(
                if c & 1 == 0 { lo.x } else { hi.x },
                if c & 2 == 0 { lo.y } else { hi.y },
                if c & 4 == 0 { lo.z } else { hi.z },
            );
            self.strictly_inside(&corner)
        })
    }

    /// Uniform surface sample with its outward normal.
    pub fn sample(&self, rng: &mut impl Rng) -> (Point3, Vector3<f64>) {
        match *self {
            Primitive::Plane { z, center, half, yaw } => {
                let local = Vector2::new(rng.gen_range(-half[0]..=half[0]), rng.gen_range(-half[1]..=half[1]));
                let xy = Vector2::from(center) + rot2(yaw) * local;
                (Point3::new(xy.x, xy.y, z), Vector3::z())
            }
            Primitive::Sphere { center, radius } => {
                let n = unit_vector(rng);
                (center + n * radius, n)
            }
            Primitive::Cylinder { base, radius, height } => {
                let side = 2.0 * PI * radius * height;
                let cap = PI * radius * radius;
                let u = rng.gen_range(0.0..side + 2.0 * cap);
                let phi = rng.gen_range(0.0..2.0 * PI);
                if u < side {
                    let n = Vector3::new(phi.cos(), phi.sin(), 0.0);
                    (base + n * radius + Vector3::z() * rng.gen_range(0.0..=height), n)
                } else {
                    let rr = radius * rng.gen::<f64>().sqrt();
                    let off = Vector3::new(rr * phi.cos(), rr * phi.sin(), 0.0);
                    if u < side + cap {
                        (base + off + Vector3::z() * height, Vector3::z())
                    } else {
                        (base + off, -Vector3::z())
                    }
                }
            }
            Primitive::Box { center, half, yaw } => {
                let faces = [half.y * half.z, half.x * half.z, half.x * half.y];
                let total = 2.0 * faces.iter().sum::<f64>();
                let mut u = rng.gen_range(0.0..total);
                let mut axis = 0;
                while axis < 2 && u >= 2.0 * faces[axis] {
                    u -= 2.0 * faces[axis];
                    axis += 1;
                }
                let sign = if u < faces[axis] { 1.0 } else { -1.0 };
                let mut local = Vector3::new(
                    rng.gen_range(-half.x..=half.x),
                    rng.gen_range(-half.y..=half.y),
                    rng.gen_range(-half.z..=half.z),
                );
                local[axis] = sign * half[axis];
                let mut n = Vector3::zeros();
                n[axis] = sign;
                let r = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), yaw);
                (center + r * local, r * n)
            }
        }
    }
}

fn unit_vector(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-6 && n <= 1.0 {
            return v / n;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenePrimitive {
    pub shape: Primitive,
    pub class: u8,
}

/// Sensor path: `frames` poses evenly spaced on a circle around `center`,
/// each facing the center, at `height` above it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    pub center: Point3,
    pub radius: f64,
    pub height: f64,
    pub frames: usize,
    pub start_angle: f64,
}

impl Trajectory {
    pub fn pose(&self, frame: usize) -> RigidPose {
        let phi = self.start_angle + 2.0 * PI * frame as f64 / self.frames as f64;
        let pos = self.center.coords + Vector3::new(self.radius * phi.cos(), self.radius * phi.sin(), self.height);
        RigidPose::from_yaw(phi + PI, pos)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub primitives: Vec<ScenePrimitive>,
    pub trajectory: Trajectory,
    /// Ego-frame lattice of the ground-truth grid.
    pub grid: GridSpec,
    /// Outlier points labeled noise, as a fraction of the surface samples.
    pub noise_fraction: f64,
    /// Frame whose ego lattice the ground truth is expressed in.
    pub keyframe: usize,
}

impl Default for SyntheticScene {
    /// Grass plane, a spherical tree crown and a cylindrical bush, seen from
    /// eight frames, with 5% noise points.
    fn default() -> Self {
        Self {
            primitives: vec![
                ScenePrimitive {
                    shape: Primitive::Plane {
                        z: 0.0,
                        center: [0.0, 0.0],
                        half: [15.0, 15.0],
                        yaw: 0.0,
                    },
                    class: 1,
                },
                ScenePrimitive {
                    shape: Primitive::Sphere {
                        center: Point3::new(-1.5, 1.0, 2.0),
                        radius: 1.0,
                    },
                    class: 2,
                },
                ScenePrimitive {
                    shape: Primitive::Cylinder {
                        base: Point3::new(1.8, -1.5, 0.0),
                        radius: 0.6,
                        height: 1.2,
                    },
                    class: 3,
                },
            ],
            trajectory: Trajectory {
                center: Point3::origin(),
                radius: 10.0,
                height: 1.1,
                frames: 8,
                start_angle: 0.3,
            },
            grid: GridSpec::default(),
            noise_fraction: 0.05,
            keyframe: 4,
        }
    }
}

impl SyntheticScene {
    pub fn validate(&self) -> Result<()> {
        if self.primitives.is_empty() || self.trajectory.frames == 0 {
            return Err(OccError::Precondition("scene needs primitives and frames".into()));
        }
        if self.keyframe >= self.trajectory.frames {
            return Err(OccError::Precondition("keyframe outside trajectory".into()));
        }
        if self.primitives.iter().any(|p| p.class == 0 || p.class == NOISE) {
            return Err(OccError::Precondition("primitive classes must be 1..=254".into()));
        }
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return Err(OccError::Precondition("noise_fraction must be in [0, 1)".into()));
        }
        self.grid.validate()
    }

    /// Analytic ground truth in the ego frame of `ego_pose` (ego → world).
    pub fn ground_truth(&self, ego_pose: &RigidPose) -> Result<OccupancyGrid> {
        let to_ego = ego_pose.inverse();
        let shapes: Vec<(Primitive, u8)> = self
            .primitives
            .iter()
            .map(|p| Ok((p.shape.transformed(&to_ego)?, p.class)))
            .collect::<Result<_>>()?;
        let spec = self.grid;
        let labels = spec
            .indices()
            .map(|idx| {
                let (lo, hi) = spec.voxel_bounds(idx);
                shapes
                    .iter()
                    .rev()
                    .find(|(s, _)| s.touches_surface(&lo, &hi))
                    .map_or(0, |&(_, c)| c)
            })
            .collect();
        OccupancyGrid::from_labels(spec, labels)
    }

    pub fn keyframe_pose(&self) -> RigidPose {
        self.trajectory.pose(self.keyframe)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticOutput {
    pub frames: Vec<PosedFrame>,
    /// Ground truth in the keyframe's ego lattice.
    pub gt: OccupancyGrid,
}

/// Samples `n_points` surface points per frame (split evenly across
/// primitives, then culled to the sensor-facing side), jitters them by an
/// isotropic Gaussian of `noise_sigma` meters and appends noise outliers
/// uniformly inside the grid. Samples inside another primitive's solid are
/// dropped. Timestamps are 0.1 s apart.
pub fn generate_synthetic(scene: &SyntheticScene, n_points: usize, noise_sigma: f64, seed: u64) -> Result<SyntheticOutput> {
    scene.validate()?;
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(OccError::Precondition("noise_sigma must be finite and non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let per_primitive = n_points / scene.primitives.len();
    let spec = scene.grid;
    let mut frames = Vec::with_capacity(scene.trajectory.frames);
    for f in 0..scene.trajectory.frames {
        let pose = scene.trajectory.pose(f);
        let sensor = Point3::from(pose.translation());
        let to_ego = pose.inverse();
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (i, prim) in scene.primitives.iter().enumerate() {
            for _ in 0..per_primitive {
                let (p, n) = prim.shape.sample(&mut rng);
                if n.dot(&(sensor - p)) <= 0.0 {
                    continue;
                }
                let occluded = scene
                    .primitives
                    .iter()
                    .enumerate()
                    .any(|(j, q)| j != i && q.shape.contains(&p));
                if occluded {
                    continue;
                }
                let p = if noise_sigma > 0.0 {
                    p + Vector3::new(jitter.sample(&mut rng), jitter.sample(&mut rng), jitter.sample(&mut rng))
                } else {
                    p
                };
                points.push(to_ego.apply(&p));
                labels.push(prim.class);
            }
        }
        let n_noise = (points.len() as f64 * scene.noise_fraction).round() as usize;
        let max = spec.max_corner();
        for _ in 0..n_noise {
            points.push(Point3::new(
                rng.gen_range(spec.origin.x..max.x),
                rng.gen_range(spec.origin.y..max.y),
                rng.gen_range(spec.origin.z..max.z),
            ));
            labels.push(NOISE);
        }
        let cloud = SemanticPointCloud::new(points, labels)?;
        frames.push(PosedFrame::new(cloud, pose, f as f64 * 0.1, f as u32));
    }
    let gt = scene.ground_truth(&scene.keyframe_pose())?;
    Ok(SyntheticOutput { frames, gt })
}

/// File names used by [`write_sequence`].
pub fn frame_stem(i: usize) -> String {
    format!("{i:06}")
}

/// Writes a sequence directory: `velodyne/*.bin`, `labels/*.label`,
/// `poses.txt`, `frames.txt`, `gt_<keyframe>.wocc` and `manifest.cfg`.
/// `extra` holds `key = value` lines that override or extend the defaults.
pub fn write_sequence(dir: &Path, scene: &SyntheticScene, out: &SyntheticOutput, extra: &[String]) -> Result<()> {
    std::fs::create_dir_all(dir.join("velodyne"))?;
    std::fs::create_dir_all(dir.join("labels"))?;
    let mut list = String::new();
    for (i, f) in out.frames.iter().enumerate() {
        let stem = frame_stem(i);
        io::write_point_bin(&dir.join(format!("velodyne/{stem}.bin")), f.cloud.points(), None)?;
        io::write_labels(&dir.join(format!("labels/{stem}.label")), f.cloud.labels())?;
        list.push_str(&format!("velodyne/{stem}.bin labels/{stem}.label {}\n", f.timestamp));
    }
    io::write_atomic(&dir.join("frames.txt"), list.as_bytes())?;
    let poses: Vec<RigidPose> = out.frames.iter().map(|f| f.pose_world).collect();
    io::write_poses(&dir.join("poses.txt"), &poses)?;
    io::write_grid(&dir.join(format!("gt_{}.wocc", frame_stem(scene.keyframe))), &out.gt)?;
    let g = scene.grid;
    let defaults = format!(
        "poses = poses.txt\nframe_list = frames.txt\nlabel_remap = identity\n\
         window = {}\nkeyframes = {}\ndepth_coarse = 6\ndepth_fine = 8\nknn_k = 15\n\
         grid_dims = {},{},{}\nvoxel_size = {}\ngrid_origin = {},{},{}\n",
        out.frames.len(),
        scene.keyframe,
        g.dims[0],
        g.dims[1],
        g.dims[2],
        g.voxel_size,
        g.origin.x,
        g.origin.y,
        g.origin.z
    );
    let key = |line: &str| line.split('=').next().unwrap_or("").trim().to_string();
    let overridden: Vec<String> = extra.iter().map(|l| key(l)).collect();
    let mut manifest = String::new();
    for line in defaults.lines().filter(|l| !overridden.contains(&key(l))).chain(extra.iter().map(String::as_str)) {
        manifest.push_str(line);
        manifest.push('\n');
    }
    io::write_atomic(&dir.join("manifest.cfg"), manifest.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn plane_only_fills_one_slab() {
        let mut scene = SyntheticScene::default();
        scene.primitives.truncate(1);
        let out = generate_synthetic(&scene, 2000, 0.0, 1).unwrap();
        let spec = scene.grid;
        // ground sits 1.1 m below the sensor, in slab k = 4
        for idx in spec.indices() {
            assert_eq!(out.gt.get(idx), if idx[2] == 4 { 1 } else { 0 }, "{idx:?}");
        }
        for f in &out.frames {
            for (p, &l) in f.cloud.points().iter().zip(f.cloud.labels()) {
                if l == 1 {
                    assert!((p.z + 1.1).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn same_seed_same_output() {
        let scene = SyntheticScene::default();
        let a = generate_synthetic(&scene, 3000, 0.01, 7).unwrap();
        let b = generate_synthetic(&scene, 3000, 0.01, 7).unwrap();
        assert_eq!(a.gt, b.gt);
        for (x, y) in a.frames.iter().zip(&b.frames) {
            assert_eq!(x.cloud, y.cloud);
            assert_eq!(x.pose_world, y.pose_world);
        }
        let c = generate_synthetic(&scene, 3000, 0.01, 8).unwrap();
        assert_ne!(a.frames[0].cloud, c.frames[0].cloud);
    }

    #[test]
    fn noise_share_and_visibility() {
        let scene = SyntheticScene::default();
        let out = generate_synthetic(&scene, 9000, 0.0, 2).unwrap();
        for f in &out.frames {
            let noise = f.cloud.labels().iter().filter(|&&l| l == NOISE).count();
            let surface = f.cloud.len() - noise;
            assert!(((noise as f64) - 0.05 * surface as f64).abs() <= 1.0);
            // sensor sits at the ego origin; every surface point faces it
            for (p, &l) in f.cloud.points().iter().zip(f.cloud.labels()) {
                if l == 2 {
                    let c = f.pose_world.inverse().apply(&Point3::new(-1.5, 1.0, 2.0));
                    assert!((p - c).dot(&(Point3::origin() - p)) > 0.0);
                }
            }
        }
    }

    #[test]
    fn sphere_gt_matches_dense_sampling() {
        let scene = SyntheticScene {
            primitives: vec![ScenePrimitive {
                shape: Primitive::Sphere {
                    center: Point3::new(0.37, -0.21, 1.93),
                    radius: 1.3,
                },
                class: 2,
            }],
            ..SyntheticScene::default()
        };
        let pose = scene.keyframe_pose();
        let gt = scene.ground_truth(&pose).unwrap();
        let sphere = scene.primitives[0].shape.transformed(&pose.inverse()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hit: HashSet<[usize; 3]> = (0..2_000_000)
            .filter_map(|_| scene.grid.voxel_of(&sphere.sample(&mut rng).0))
            .collect();
        let count = gt.occupied_count();
        assert!(hit.iter().all(|i| gt.get(*i) == 2));
        let rel = (count as f64 - hit.len() as f64).abs() / hit.len() as f64;
        assert!(rel < 0.02, "gt {count} sampled {}", hit.len());
    }

    #[test]
    fn primitive_surface_tests() {
        let lo = Point3::new(0.0, 0.0, 0.0);
        let hi = Point3::new(1.0, 1.0, 1.0);
        let inside = Primitive::Sphere { center: Point3::new(0.5, 0.5, 0.5), radius: 3.0 };
        assert!(!inside.touches_surface(&lo, &hi));
        let cutting = Primitive::Sphere { center: Point3::new(0.5, 0.5, 0.5), radius: 0.6 };
        assert!(cutting.touches_surface(&lo, &hi));
        let cyl = Primitive::Cylinder { base: Point3::new(2.0, 0.5, 0.0), radius: 1.0, height: 2.0 };
        assert!(cyl.touches_surface(&lo, &hi));
        let far = Primitive::Cylinder { base: Point3::new(2.1, 0.5, 0.0), radius: 1.0, height: 2.0 };
        assert!(!far.touches_surface(&lo, &hi));
        let enclosing = Primitive::Box { center: Point3::new(0.5, 0.5, 0.5), half: Vector3::new(2.0, 2.0, 2.0), yaw: 0.7 };
        assert!(!enclosing.touches_surface(&lo, &hi));
        let enclosed = Primitive::Box { center: Point3::new(0.5, 0.5, 0.5), half: Vector3::new(0.2, 0.2, 0.2), yaw: 0.7 };
        assert!(enclosed.touches_surface(&lo, &hi));
        let diamond = Primitive::Box { center: Point3::new(1.6, 0.5, 0.5), half: Vector3::new(0.5, 0.5, 0.1), yaw: PI / 4.0 };
        // the rotated corner reaches x = 1.6 - 0.707; unrotated, the face stays at x = 1.1
        assert!(diamond.touches_surface(&lo, &hi));
        let square = Primitive::Box { center: Point3::new(1.6, 0.5, 0.5), half: Vector3::new(0.5, 0.5, 0.1), yaw: 0.0 };
        assert!(!square.touches_surface(&lo, &hi));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for shape in [cutting, cyl, diamond] {
            for _ in 0..200 {
                let (p, n) = shape.sample(&mut rng);
                assert!(shape.contains(&(p - n * 1e-9)));
                assert!(!shape.contains(&(p + n * 1e-6)));
            }
        }
    }

    #[test]
    fn sequence_files_load_as_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let scene = SyntheticScene::default();
        let out = generate_synthetic(&scene, 600, 0.0, 5).unwrap();
        write_sequence(dir.path(), &scene, &out, &[]).unwrap();
        let m = io::SequenceManifest::load(&dir.path().join("manifest.cfg")).unwrap();
        assert_eq!(m.frames.len(), 8);
        assert_eq!(m.config.grid, scene.grid);
        assert_eq!(io::read_grid(&dir.path().join("gt_000004.wocc")).unwrap(), out.gt);
    }
}
