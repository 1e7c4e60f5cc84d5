//! Poisson surface reconstruction on a sparse regular lattice.
//!
//! The lattice is `2^depth` cells per axis over the padded bounding cube of
//! the samples. Only a narrow band of nodes around the samples is active:
//! nodes within `splat_radius` cells of a sample (the core) plus one ring.
//! Nodes outside the band are held at zero.
//!
//! The normal field lives on lattice edges (x-components on x-edges, and so
//! on), so the node divergence and the 7-point Laplacian are exactly
//! `div ∘ grad` of each other and sums of the divergence telescope to
//! boundary fluxes.

use std::collections::HashMap;

use rayon::prelude::*;

use super::cg::{conjugate_gradient, CgReport, LinearOperator};
use super::mcubes::marching_cubes;
use super::mesh::TriangleMesh;
use super::{OrientedPointSet, PoissonConfig};
use crate::error::{OccError, Result};
use crate::Point3;

/// Minimum number of samples accepted by [`poisson_reconstruct`].
pub const MIN_POINTS: usize = 100;

const BOUNDS_PADDING: f64 = 0.05;
const NONE: u32 = u32::MAX;

/// Axis-aligned lattice with `cells` cells of edge `h` starting at `origin`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Lattice {
    pub origin: Point3,
    pub h: f64,
    pub cells: i64,
}

impl Lattice {
    fn around(points: &[Point3], depth: u32) -> Result<Self> {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        if !(extent > 0.0) {
            return Err(OccError::InsufficientPoints {
                needed: MIN_POINTS,
                got: 1,
            });
        }
        let side = extent * (1.0 + BOUNDS_PADDING);
        let cells = 1i64 << depth;
        let center = Point3::new(
            0.5 * (lo[0] + hi[0]),
            0.5 * (lo[1] + hi[1]),
            0.5 * (lo[2] + hi[2]),
        );
        Ok(Self {
            origin: center - nalgebra::Vector3::repeat(0.5 * side),
            h: side / cells as f64,
            cells,
        })
    }

    /// Fractional lattice coordinates.
    #[inline]
    pub fn local(&self, p: &Point3) -> [f64; 3] {
        [
            (p.x - self.origin.x) / self.h,
            (p.y - self.origin.y) / self.h,
            (p.z - self.origin.z) / self.h,
        ]
    }

    #[inline]
    pub fn world(&self, f: [f64; 3]) -> Point3 {
        Point3::new(
            self.origin.x + f[0] * self.h,
            self.origin.y + f[1] * self.h,
            self.origin.z + f[2] * self.h,
        )
    }

    fn in_range(&self, n: [i64; 3]) -> bool {
        n.iter().all(|&v| v >= 0 && v <= self.cells)
    }
}

const AXES: [[i64; 3]; 3] = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];

#[inline]
fn add(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
fn sub(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Trilinear stencil: the 8 integer positions around `u` and their weights.
fn trilinear(u: [f64; 3]) -> [([i64; 3], f64); 8] {
    let base = [u[0].floor(), u[1].floor(), u[2].floor()];
    let t = [u[0] - base[0], u[1] - base[1], u[2] - base[2]];
    let b = [base[0] as i64, base[1] as i64, base[2] as i64];
    let mut out = [([0i64; 3], 0.0); 8];
    for (c, slot) in out.iter_mut().enumerate() {
        let o = [(c & 1) as i64, ((c >> 1) & 1) as i64, ((c >> 2) & 1) as i64];
        let w = (0..3)
            .map(|a| if o[a] == 1 { t[a] } else { 1.0 - t[a] })
            .product::<f64>();
        *slot = ([b[0] + o[0], b[1] + o[1], b[2] + o[2]], w);
    }
    out
}

/// Assembled narrow-band system. Exposed to the crate for operator checks.
pub(crate) struct PoissonSystem {
    pub lattice: Lattice,
    /// Active nodes, sorted.
    pub nodes: Vec<[i64; 3]>,
    pub index: HashMap<[i64; 3], u32>,
    /// Core (non-ring) flag per active node.
    pub core: Vec<bool>,
    /// Staggered field: `field[a][e]` is the axis-`a` component on the edge
    /// from node `e` to `e + axis_a`.
    pub field: [HashMap<[i64; 3], f64>; 3],
    /// 6-neighborhood of each active node (`NONE` when inactive).
    pub neighbors: Vec<[u32; 6]>,
}

impl PoissonSystem {
    pub fn build(input: &OrientedPointSet, cfg: &PoissonConfig) -> Result<Self> {
        let lattice = Lattice::around(input.points(), cfg.depth)?;
        let r = cfg.splat_radius.ceil().max(1.0) as i64;

        let mut core_set: HashMap<[i64; 3], ()> = HashMap::new();
        for p in input.points() {
            let u = lattice.local(p);
            let b = [u[0].floor() as i64, u[1].floor() as i64, u[2].floor() as i64];
            for di in (1 - r)..=r {
                for dj in (1 - r)..=r {
                    for dk in (1 - r)..=r {
                        let n = [b[0] + di, b[1] + dj, b[2] + dk];
                        if lattice.in_range(n) {
                            core_set.insert(n, ());
                        }
                    }
                }
            }
        }
        if core_set.is_empty() {
            return Err(OccError::InsufficientPoints {
                needed: MIN_POINTS,
                got: 0,
            });
        }
        let mut active: HashMap<[i64; 3], bool> = HashMap::with_capacity(core_set.len() * 2);
        for n in core_set.keys() {
            for di in -1..=1 {
                for dj in -1..=1 {
                    for dk in -1..=1 {
                        let m = [n[0] + di, n[1] + dj, n[2] + dk];
                        if lattice.in_range(m) {
                            active.entry(m).or_insert(false);
                        }
                    }
                }
            }
        }
        for n in core_set.keys() {
            active.insert(*n, true);
        }
        let mut nodes: Vec<[i64; 3]> = active.keys().copied().collect();
        nodes.sort_unstable();
        let index: HashMap<[i64; 3], u32> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (*n, i as u32))
            .collect();
        let core = nodes.iter().map(|n| active[n]).collect();

        let neighbors = nodes
            .iter()
            .map(|&n| {
                let mut out = [NONE; 6];
                for a in 0..3 {
                    out[2 * a] = *index.get(&sub(n, AXES[a])).unwrap_or(&NONE);
                    out[2 * a + 1] = *index.get(&add(n, AXES[a])).unwrap_or(&NONE);
                }
                out
            })
            .collect();

        let mut field: [HashMap<[i64; 3], f64>; 3] = Default::default();
        for (p, n) in input.points().iter().zip(input.normals()) {
            let u = lattice.local(p);
            for a in 0..3 {
                // x-edge (i,j,k)→(i+1,j,k) sits at (i+½, j, k)
                let mut s = u;
                s[a] -= 0.5;
                for (e, w) in trilinear(s) {
                    if w != 0.0 {
                        *field[a].entry(e).or_insert(0.0) += w * n[a];
                    }
                }
            }
        }

        Ok(Self {
            lattice,
            nodes,
            index,
            core,
            field,
            neighbors,
        })
    }

    fn edge(&self, axis: usize, e: [i64; 3]) -> f64 {
        *self.field[axis].get(&e).unwrap_or(&0.0)
    }

    /// Discrete divergence at a node, per unit volume.
    pub fn divergence(&self, n: [i64; 3]) -> f64 {
        (0..3)
            .map(|a| self.edge(a, n) - self.edge(a, sub(n, AXES[a])))
            .sum::<f64>()
            / self.lattice.h
    }

    /// Right-hand side of `(6χ − Σχ_nbr) = −h² div V`.
    pub fn rhs(&self) -> Vec<f64> {
        let h2 = self.lattice.h * self.lattice.h;
        self.nodes.iter().map(|&n| -h2 * self.divergence(n)).collect()
    }

    /// Outward flux of the field through the faces of the node box
    /// `[lo, hi]` (inclusive node ranges), per unit area.
    #[cfg(test)]
    pub fn box_flux(&self, lo: [i64; 3], hi: [i64; 3]) -> f64 {
        let mut flux = 0.0;
        for a in 0..3 {
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            for u in lo[b]..=hi[b] {
                for v in lo[c]..=hi[c] {
                    let mut top = [0i64; 3];
                    top[a] = hi[a];
                    top[b] = u;
                    top[c] = v;
                    let mut bottom = top;
                    bottom[a] = lo[a] - 1;
                    flux += self.edge(a, top) - self.edge(a, bottom);
                }
            }
        }
        flux / self.lattice.h
    }
}

impl LinearOperator for PoissonSystem {
    fn dim(&self) -> usize {
        self.nodes.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut()
            .zip(self.neighbors.par_iter())
            .enumerate()
            .for_each(|(i, (out, nb))| {
                let mut s = 6.0 * x[i];
                for &j in nb {
                    if j != NONE {
                        s -= x[j as usize];
                    }
                }
                *out = s;
            });
    }
}

/// Intermediate results of a reconstruction, for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct PoissonOutput {
    pub mesh: TriangleMesh,
    pub isolevel: f64,
    pub cell_size: f64,
    pub active_nodes: usize,
    pub solver: CgReport,
}

/// Reconstructs a watertight-where-sampled surface from oriented samples.
pub fn poisson_reconstruct(input: &OrientedPointSet, cfg: &PoissonConfig) -> Result<TriangleMesh> {
    poisson_reconstruct_detailed(input, cfg).map(|o| o.mesh)
}

pub fn poisson_reconstruct_detailed(input: &OrientedPointSet, cfg: &PoissonConfig) -> Result<PoissonOutput> {
    cfg.validate()?;
    input.validate()?;
    if input.len() < MIN_POINTS {
        return Err(OccError::InsufficientPoints {
            needed: MIN_POINTS,
            got: input.len(),
        });
    }
    let system = PoissonSystem::build(input, cfg)?;
    let rhs = system.rhs();
    let (chi, solver) = conjugate_gradient(&system, &rhs, cfg.cg_tol, cfg.cg_max_iters)?;
    log::debug!(
        "poisson depth {}: {} active nodes, {} CG iterations, residual {:.2e}",
        cfg.depth,
        system.nodes.len(),
        solver.iterations,
        solver.final_residual()
    );

    let value = |n: [i64; 3]| -> f64 {
        system
            .index
            .get(&n)
            .map(|&i| chi[i as usize])
            .unwrap_or(0.0)
    };
    let lat = system.lattice;
    let isolevel = input
        .points()
        .iter()
        .map(|p| {
            trilinear(lat.local(p))
                .iter()
                .map(|(n, w)| w * value(*n))
                .sum::<f64>()
        })
        .sum::<f64>()
        / input.len() as f64;

    // cells whose 8 corners are all core nodes
    let is_core = |n: [i64; 3]| system.index.get(&n).is_some_and(|&i| system.core[i as usize]);
    let cells: Vec<[i64; 3]> = system
        .nodes
        .iter()
        .zip(&system.core)
        .filter(|(_, &c)| c)
        .map(|(n, _)| *n)
        .filter(|&n| {
            (0..8).all(|c| is_core([n[0] + (c & 1), n[1] + ((c >> 1) & 1), n[2] + ((c >> 2) & 1)]))
        })
        .collect();
    let mesh = marching_cubes(&cells, value, isolevel, |f| lat.world(f)).cleaned();

    Ok(PoissonOutput {
        mesh,
        isolevel,
        cell_size: lat.h,
        active_nodes: system.nodes.len(),
        solver,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
        loop {
            let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                return v / n;
            }
        }
    }

    fn sphere(n: usize, r: f64, seed: u64) -> OrientedPointSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, nn): (Vec<_>, Vec<_>) = (0..n)
            .map(|_| {
                let u = unit(&mut rng);
                (Point3::from(u * r), u)
            })
            .unzip();
        OrientedPointSet::new(p, nn).unwrap()
    }

    fn cfg(depth: u32) -> PoissonConfig {
        PoissonConfig {
            depth,
            ..PoissonConfig::default()
        }
    }

    #[test]
    fn divergence_sums_to_box_flux() {
        let input = sphere(3000, 2.0, 5);
        let sys = PoissonSystem::build(&input, &cfg(5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let lo = [rng.gen_range(0..16), rng.gen_range(0..16), rng.gen_range(0..16)];
            let hi = [lo[0] + rng.gen_range(1..16), lo[1] + rng.gen_range(1..16), lo[2] + rng.gen_range(1..16)];
            let mut total = 0.0;
            for i in lo[0]..=hi[0] {
                for j in lo[1]..=hi[1] {
                    for k in lo[2]..=hi[2] {
                        total += sys.divergence([i, j, k]);
                    }
                }
            }
            let flux = sys.box_flux(lo, hi);
            let scale = flux.abs().max(1.0);
            assert!((total - flux).abs() / scale < 1e-6, "{total} vs {flux}");
        }
    }

    #[test]
    fn operator_is_symmetric() {
        let input = sphere(2000, 2.0, 6);
        let sys = PoissonSystem::build(&input, &cfg(4)).unwrap();
        let n = sys.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (mut ax, mut az) = (vec![0.0; n], vec![0.0; n]);
        sys.apply(&x, &mut ax);
        sys.apply(&z, &mut az);
        let l: f64 = z.iter().zip(&ax).map(|(a, b)| a * b).sum();
        let r: f64 = x.iter().zip(&az).map(|(a, b)| a * b).sum();
        assert!((l - r).abs() < 1e-9 * l.abs().max(1.0));
    }

    #[test]
    fn residuals_do_not_increase() {
        let out = poisson_reconstruct_detailed(&sphere(20_000, 5.0, 3), &cfg(6)).unwrap();
        let hist = &out.solver.residual_history;
        for w in hist.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn sphere_reconstruction_is_accurate() {
        let out = poisson_reconstruct_detailed(&sphere(50_000, 5.0, 1), &cfg(6)).unwrap();
        let errs: Vec<f64> = out.mesh.vertices().iter().map(|v| (v.coords.norm() - 5.0).abs()).collect();
        let rms = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
        let max = errs.iter().cloned().fold(0.0, f64::max);
        assert!(rms < 0.1 && max < 0.25, "rms {rms} max {max}");
        assert_eq!(out.mesh.boundary_edge_count(), 0);
    }

    #[test]
    fn plane_patch_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Point3> = (0..20_000)
            .map(|_| Point3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), 0.0))
            .collect();
        let input = OrientedPointSet::new(pts, vec![Vector3::z(); 20_000]).unwrap();
        let mesh = poisson_reconstruct(&input, &cfg(6)).unwrap();
        assert!(!mesh.is_empty());
        for t in 0..mesh.triangles().len() {
            let [a, b, c] = mesh.triangle(t);
            let interior = [a, b, c].iter().all(|v| v.x.abs() < 4.0 && v.y.abs() < 4.0);
            if !interior {
                continue;
            }
            for v in [a, b, c] {
                assert!(v.z.abs() < 0.05, "vertex {v} off plane");
            }
            let n = (b - a).cross(&(c - a)).normalize();
            assert!(n.z.abs() > 5f64.to_radians().cos());
        }
    }

    #[test]
    fn rotated_input_gives_rotated_mesh() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // ellipsoid, so rotation is visible
        let axes = Vector3::new(3.0, 2.0, 1.5);
        let (pts, nrm): (Vec<_>, Vec<_>) = (0..30_000)
            .map(|_| {
                let u = unit(&mut rng);
                let p = u.component_mul(&axes);
                let n = u.component_div(&axes).normalize();
                (Point3::from(p), n)
            })
            .unzip();
        let rot = Rotation3::from_euler_angles(0.3, -0.7, 1.1);
        let input = OrientedPointSet::new(pts.clone(), nrm.clone()).unwrap();
        let rotated = OrientedPointSet::new(
            pts.iter().map(|p| rot * p).collect(),
            nrm.iter().map(|n| rot * n).collect(),
        )
        .unwrap();
        let a = poisson_reconstruct_detailed(&input, &cfg(6)).unwrap();
        let b = poisson_reconstruct_detailed(&rotated, &cfg(6)).unwrap();
        let h = a.cell_size.max(b.cell_size);
        let a_rot: Vec<Point3> = a.mesh.vertices().iter().map(|v| rot * v).collect();
        let tree = crate::spatial::KdTree::build(&a_rot).unwrap();
        let mut far = 0;
        for v in b.mesh.vertices() {
            if tree.knn(v, 1)[0].distance > h {
                far += 1;
            }
        }
        assert_eq!(far, 0, "{far} of {} vertices farther than one cell ({h})", b.mesh.vertices().len());
    }

    #[test]
    fn rejects_bad_input() {
        let small = sphere(50, 1.0, 2);
        assert!(matches!(
            poisson_reconstruct(&small, &cfg(5)),
            Err(OccError::InsufficientPoints { .. })
        ));
        let mut c = cfg(5);
        c.cg_max_iters = 1;
        assert!(matches!(
            poisson_reconstruct(&sphere(500, 1.0, 2), &c),
            Err(OccError::SolverNotConverged { .. })
        ));
    }
}
