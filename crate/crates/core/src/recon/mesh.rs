use std::collections::HashMap;

use crate::error::{OccError, Result};
use crate::Point3;

/// Triangles with area below this are dropped by [`TriangleMesh::cleaned`].
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;
/// Vertices closer than this are merged by [`TriangleMesh::cleaned`].
pub const VERTEX_MERGE_DIST: f64 = 1e-7;

/// Indexed triangle set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v as usize >= n) {
                return Err(OccError::Precondition(format!(
                    "triangle {t} references a vertex beyond {n}"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(OccError::Precondition(format!(
                    "triangle {t} repeats a vertex index"
                )));
            }
        }
        if vertices.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(OccError::Precondition("non-finite mesh vertex".into()));
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Plain union: `other`'s indices are offset by this mesh's vertex count.
    pub fn concat(&self, other: &TriangleMesh) -> TriangleMesh {
        let off = self.vertices.len() as u32;
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut triangles = self.triangles.clone();
        triangles.extend(other.triangles.iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
        TriangleMesh {
            vertices,
            triangles,
        }
    }

    /// Merges near-coincident vertices, drops degenerate triangles and
    /// unreferenced vertices. Surviving triangles keep their relative order.
    pub fn cleaned(&self) -> TriangleMesh {
        let tol = VERTEX_MERGE_DIST;
        let key = |p: &Point3| -> [i64; 3] {
            [
                (p.x / tol).floor() as i64,
                (p.y / tol).floor() as i64,
                (p.z / tol).floor() as i64,
            ]
        };
        let mut buckets: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        let mut merged: Vec<Point3> = Vec::with_capacity(self.vertices.len());
        let mut remap = Vec::with_capacity(self.vertices.len());
        for p in &self.vertices {
            let k = key(p);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(list) = buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                            for &v in list {
                                if (merged[v as usize] - p).norm() <= tol {
                                    found = Some(v);
                                    break 'search;
                                }
                            }
                        }
                    }
                }
            }
            let id = found.unwrap_or_else(|| {
                let id = merged.len() as u32;
                merged.push(*p);
                buckets.entry(k).or_default().push(id);
                id
            });
            remap.push(id);
        }

        let mut used = vec![u32::MAX; merged.len()];
        let mut vertices = Vec::new();
        let mut triangles = Vec::with_capacity(self.triangles.len());
        for tri in &self.triangles {
            let t = [
                remap[tri[0] as usize],
                remap[tri[1] as usize],
                remap[tri[2] as usize],
            ];
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                continue;
            }
            let (a, b, c) = (merged[t[0] as usize], merged[t[1] as usize], merged[t[2] as usize]);
            if 0.5 * (b - a).cross(&(c - a)).norm() < MIN_TRIANGLE_AREA {
                continue;
            }
            let mut out = [0u32; 3];
            for (o, &v) in out.iter_mut().zip(t.iter()) {
                if used[v as usize] == u32::MAX {
                    used[v as usize] = vertices.len() as u32;
                    vertices.push(merged[v as usize]);
                }
                *o = used[v as usize];
            }
            triangles.push(out);
        }
        TriangleMesh {
            vertices,
            triangles,
        }
    }

    /// Edges used by other than exactly two triangles.
    pub fn boundary_edge_count(&self) -> usize {
        let mut edges: HashMap<(u32, u32), usize> = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        edges.values().filter(|&&c| c != 2).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_indices() {
        let v = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 3]]).is_err());
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 1]]).is_err());
        assert!(TriangleMesh::new(v, vec![[0, 1, 2]]).is_ok());
    }

    #[test]
    fn cleanup_merges_and_drops() {
        let v = vec![
            Point3::origin(),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0 + 5e-8, 0.0, 0.0), // duplicate of 1
            Point3::new(2.0, 0.0, 0.0),        // collinear with 0,1
            Point3::new(9.0, 9.0, 9.0),        // unreferenced
        ];
        let m = TriangleMesh::new(v, vec![[0, 1, 2], [3, 2, 0], [0, 1, 4], [1, 3, 2]]).unwrap();
        let c = m.cleaned();
        assert_eq!(c.vertices().len(), 3);
        assert_eq!(c.triangles().len(), 2);
        for t in 0..c.triangles().len() {
            assert!(c.triangle_area(t) >= MIN_TRIANGLE_AREA);
        }
    }

    #[test]
    fn concat_offsets_indices() {
        let v = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        let a = TriangleMesh::new(v.clone(), vec![[0, 1, 2]]).unwrap();
        let c = a.concat(&a);
        assert_eq!(c.vertices().len(), 6);
        assert_eq!(c.triangles()[1], [3, 4, 5]);
        assert!(a.concat(&TriangleMesh::default()) == a);
    }
}
