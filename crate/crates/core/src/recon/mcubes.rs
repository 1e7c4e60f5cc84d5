//! Marching cubes over an arbitrary set of lattice cells.

use std::collections::HashMap;

use super::mesh::TriangleMesh;
use super::tables::TRI_TABLE;
use crate::Point3;

/// Corner offsets, corner `c` of cell `(i,j,k)` is node `(i,j,k) + CORNERS[c]`.
const CORNERS: [[i64; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Corner pairs of the 12 cube edges.
const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Extracts the `iso` level set of a node-sampled field over `cells`.
///
/// Nodes with value below `iso` are inside. Vertices on shared lattice edges
/// are shared between cells, so the output is watertight wherever the cell
/// set is closed. Triangles wind counter-clockwise seen from the outside
/// (larger values). `to_world` maps fractional lattice coordinates to space.
pub fn marching_cubes<V, W>(cells: &[[i64; 3]], value: V, iso: f64, to_world: W) -> TriangleMesh
where
    V: Fn([i64; 3]) -> f64,
    W: Fn([f64; 3]) -> Point3,
{
    let mut vertices: Vec<Point3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    let mut edge_vertex: HashMap<([i64; 3], [i64; 3]), u32> = HashMap::new();

    for cell in cells {
        let mut nodes = [[0i64; 3]; 8];
        let mut vals = [0.0f64; 8];
        let mut case = 0usize;
        for c in 0..8 {
            nodes[c] = [
                cell[0] + CORNERS[c][0],
                cell[1] + CORNERS[c][1],
                cell[2] + CORNERS[c][2],
            ];
            vals[c] = value(nodes[c]);
            if vals[c] < iso {
                case |= 1 << c;
            }
        }
        if case == 0 || case == 255 {
            continue;
        }
        let row = &TRI_TABLE[case];
        let mut t = 0;
        while t < 16 && row[t] >= 0 {
            let mut tri = [0u32; 3];
            for (slot, &e) in tri.iter_mut().zip(row[t..t + 3].iter()) {
                let [a, b] = EDGES[e as usize];
                let (na, nb) = if nodes[a] <= nodes[b] {
                    (nodes[a], nodes[b])
                } else {
                    (nodes[b], nodes[a])
                };
                *slot = *edge_vertex.entry((na, nb)).or_insert_with(|| {
                    let (va, vb) = (value(na), value(nb));
                    let denom = vb - va;
                    let s = if denom.abs() > 0.0 {
                        ((iso - va) / denom).clamp(0.0, 1.0)
                    } else {
                        0.5
                    };
                    let f = [
                        na[0] as f64 + s * (nb[0] - na[0]) as f64,
                        na[1] as f64 + s * (nb[1] - na[1]) as f64,
                        na[2] as f64 + s * (nb[2] - na[2]) as f64,
                    ];
                    vertices.push(to_world(f));
                    (vertices.len() - 1) as u32
                });
            }
            // the table winds triangles facing the inside corners
            triangles.push([tri[0], tri[2], tri[1]]);
            t += 3;
        }
    }

    let mut mesh = TriangleMesh::default();
    if !triangles.is_empty() {
        // degenerate triangles (shared vertices on exact-iso nodes) are allowed
        // here and removed by the caller's cleanup
        mesh = unchecked_mesh(vertices, triangles);
    }
    mesh
}

fn unchecked_mesh(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> TriangleMesh {
    let keep: Vec<[u32; 3]> = triangles
        .into_iter()
        .filter(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2])
        .collect();
    TriangleMesh::new(vertices, keep).expect("marching cubes produced valid indices")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_mesh(n: i64, r: f64) -> TriangleMesh {
        let c = n as f64 / 2.0;
        let cells: Vec<[i64; 3]> = (0..n)
            .flat_map(|i| (0..n).flat_map(move |j| (0..n).map(move |k| [i, j, k])))
            .collect();
        marching_cubes(
            &cells,
            |p| {
                let d = [p[0] as f64 - c, p[1] as f64 - c, p[2] as f64 - c];
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() - r
            },
            0.0,
            |f| Point3::new(f[0] - c, f[1] - c, f[2] - c),
        )
        .cleaned()
    }

    fn signed_volume(m: &TriangleMesh) -> f64 {
        (0..m.triangles().len())
            .map(|t| {
                let [a, b, c] = m.triangle(t);
                a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
            })
            .sum()
    }

    #[test]
    fn sphere_is_closed_and_outward() {
        let m = sphere_mesh(24, 8.3);
        assert!(!m.is_empty());
        assert_eq!(m.boundary_edge_count(), 0);
        let vol = signed_volume(&m);
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 8.3f64.powi(3);
        assert!(vol > 0.0, "triangles must face outward");
        assert!((vol - exact).abs() / exact < 0.03, "{vol} vs {exact}");
        for v in m.vertices() {
            assert!((v.coords.norm() - 8.3).abs() < 0.1);
        }
    }

    #[test]
    fn every_case_is_watertight() {
        // Random signs on a small block exercise the ambiguous cases; a
        // closed cell set with outside border must give a closed surface.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = 6i64;
            let mut vals = HashMap::new();
            for i in 0..=n {
                for j in 0..=n {
                    for k in 0..=n {
                        let border = [i, j, k].iter().any(|&v| v == 0 || v == n);
                        let v = if border { 1.0 } else { rng.gen_range(-1.0..1.0) };
                        vals.insert([i, j, k], v);
                    }
                }
            }
            let cells: Vec<[i64; 3]> = (0..n)
                .flat_map(|i| (0..n).flat_map(move |j| (0..n).map(move |k| [i, j, k])))
                .collect();
            let m = marching_cubes(&cells, |p| vals[&p], 0.0, |f| Point3::new(f[0], f[1], f[2]));
            assert_eq!(m.boundary_edge_count(), 0);
        }
    }
}
