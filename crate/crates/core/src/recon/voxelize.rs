//! Surface voxelization by triangle / box separating-axis tests.

use nalgebra::Vector3;
use rayon::prelude::*;

use super::mesh::TriangleMesh;
use crate::grid::{GridSpec, OccupancyGrid, EMPTY};
use crate::Point3;

/// Placeholder class written into occupied voxels before labeling.
pub const OCCUPIED: u8 = 1;

/// Whether a triangle intersects the closed box `center ± half`.
///
/// Tests the 13 candidate axes: the three box normals, the triangle normal
/// and the nine cross products of box and triangle edges. Touching counts as
/// intersecting.
pub fn triangle_box_overlap(center: &Point3, half: &Vector3<f64>, tri: &[Point3; 3]) -> bool {
    let v = [tri[0] - center, tri[1] - center, tri[2] - center];
    let e = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];

    // 9 edge cross products; axis = unit_a × e
    for edge in &e {
        for a in 0..3 {
            let axis = match a {
                0 => Vector3::new(0.0, -edge.z, edge.y),
                1 => Vector3::new(edge.z, 0.0, -edge.x),
                _ => Vector3::new(-edge.y, edge.x, 0.0),
            };
            if separated(&axis, &v, half) {
                return false;
            }
        }
    }

    // box face normals
    for a in 0..3 {
        let lo = v[0][a].min(v[1][a]).min(v[2][a]);
        let hi = v[0][a].max(v[1][a]).max(v[2][a]);
        if lo > half[a] || hi < -half[a] {
            return false;
        }
    }

    // triangle plane
    let normal = e[0].cross(&e[1]);
    let d = normal.dot(&v[0]);
    let r = half.x * normal.x.abs() + half.y * normal.y.abs() + half.z * normal.z.abs();
    d.abs() <= r
}

#[inline]
fn separated(axis: &Vector3<f64>, v: &[Vector3<f64>; 3], half: &Vector3<f64>) -> bool {
    let p = [axis.dot(&v[0]), axis.dot(&v[1]), axis.dot(&v[2])];
    let lo = p[0].min(p[1]).min(p[2]);
    let hi = p[0].max(p[1]).max(p[2]);
    let r = half.x * axis.x.abs() + half.y * axis.y.abs() + half.z * axis.z.abs();
    lo > r || hi < -r
}

/// Whether a triangle touches the closed box of voxel `index`.
pub fn voxel_hit(spec: &GridSpec, index: [usize; 3], tri: &[Point3; 3]) -> bool {
    let center = spec.voxel_center_unchecked(index);
    let half = Vector3::repeat(0.5 * spec.voxel_size);
    triangle_box_overlap(&center, &half, tri)
}

/// Candidate voxel range (inclusive) whose closed boxes can touch the
/// triangle's bounding box, or `None` when it misses the grid.
fn candidate_range(spec: &GridSpec, tri: &[Point3; 3]) -> Option<[(usize, usize); 3]> {
    let mut out = [(0usize, 0usize); 3];
    for a in 0..3 {
        let lo = tri.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min);
        let hi = tri.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max);
        let s = spec.voxel_size;
        let first = ((lo - spec.origin[a]) / s).ceil() as i64 - 1;
        let last = ((hi - spec.origin[a]) / s).floor() as i64;
        let first = first.max(0);
        let last = last.min(spec.dims[a] as i64 - 1);
        if first > last {
            return None;
        }
        out[a] = (first as usize, last as usize);
    }
    Some(out)
}

/// Marks every voxel whose closed box intersects some triangle.
pub fn voxelize_mesh(mesh: &TriangleMesh, spec: &GridSpec) -> OccupancyGrid {
    let hits: Vec<Vec<usize>> = (0..mesh.triangles().len())
        .into_par_iter()
        .map(|t| {
            let tri = mesh.triangle(t);
            let mut out = Vec::new();
            if let Some(r) = candidate_range(spec, &tri) {
                for i in r[0].0..=r[0].1 {
                    for j in r[1].0..=r[1].1 {
                        for k in r[2].0..=r[2].1 {
                            if voxel_hit(spec, [i, j, k], &tri) {
                                out.push(spec.linear([i, j, k]));
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();
    let mut grid = OccupancyGrid::empty(*spec);
    let labels = grid.labels_mut();
    for list in hits {
        for l in list {
            labels[l] = OCCUPIED;
        }
    }
    grid
}

/// Fills every voxel below the lowest occupied voxel of each column.
pub fn fill_below_surface(grid: &mut OccupancyGrid) {
    let spec = *grid.spec();
    for i in 0..spec.dims[0] {
        for j in 0..spec.dims[1] {
            if let Some(lowest) = (0..spec.dims[2]).find(|&k| grid.get([i, j, k]) != EMPTY) {
                for k in 0..lowest {
                    grid.set([i, j, k], OCCUPIED);
                }
            }
        }
    }
}
