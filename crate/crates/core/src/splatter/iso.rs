//! Surface nets: one vertex per boundary cell at the mean of its edge
//! crossings, one quad per crossing lattice edge. The volume is treated as
//! zero outside its grid, so the result is always closed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{SplatError, VoxelVolume};
use crate::Vec3;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn to_obj(&self) -> String {
        let mut out = String::with_capacity(40 * (self.vertices.len() + self.triangles.len()));
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        out
    }

    pub fn write_obj(&self, path: impl AsRef<Path>) -> Result<(), SplatError> {
        fs::write(path, self.to_obj())?;
        Ok(())
    }

    /// `V - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        let edges = self.edge_use();
        self.vertices.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }

    /// `true` if every edge borders exactly two triangles.
    pub fn is_closed(&self) -> bool {
        self.edge_use().values().all(|&c| c == 2)
    }

    fn edge_use(&self) -> std::collections::BTreeMap<(u32, u32), u32> {
        let mut m = std::collections::BTreeMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *m.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        m
    }

    pub fn area(&self, t: &[u32; 3]) -> f64 {
        let [a, b, c] = t.map(|i| self.vertices[i as usize]);
        0.5 * (b - a).cross(&(c - a)).norm()
    }
}

const NONE: u32 = u32::MAX;

/// Level set `V = iso` as a closed triangle mesh.
pub fn extract_isosurface(v: &VoxelVolume, iso: f64) -> Result<TriMesh, SplatError> {
    let [nx, ny, nz] = v.spec.dims.map(|d| d as i64);
    let h = v.spec.spacing;
    let o = v.spec.origin();
    let sample = |i: i64, j: i64, k: i64| -> f64 {
        if i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz {
            0.0
        } else {
            v.values[v.spec.index(i as usize, j as usize, k as usize)]
        }
    };
    let inside = |i: i64, j: i64, k: i64| sample(i, j, k) >= iso;
    // cells span samples c..c+1 for c in -1..n
    let (cx, cy, cz) = (nx + 1, ny + 1, nz + 1);
    let cell_index = |i: i64, j: i64, k: i64| (((k + 1) * cy + (j + 1)) * cx + (i + 1)) as usize;
    let mut cell_vertex = vec![NONE; (cx * cy * cz) as usize];
    let mut mesh = TriMesh::default();
    const CORNERS: [[i64; 3]; 8] = [
        [0, 0, 0],
        [1, 0, 0],
        [0, 1, 0],
        [1, 1, 0],
        [0, 0, 1],
        [1, 0, 1],
        [0, 1, 1],
        [1, 1, 1],
    ];
    const EDGES: [(usize, usize); 12] = [
        (0, 1),
        (2, 3),
        (4, 5),
        (6, 7),
        (0, 2),
        (1, 3),
        (4, 6),
        (5, 7),
        (0, 4),
        (1, 5),
        (2, 6),
        (3, 7),
    ];
    for k in -1..nz {
        for j in -1..ny {
            for i in -1..nx {
                let vals = CORNERS.map(|c| sample(i + c[0], j + c[1], k + c[2]));
                let n_in = vals.iter().filter(|&&x| x >= iso).count();
                if n_in == 0 || n_in == 8 {
                    continue;
                }
                let mut acc = Vec3::zeros();
                let mut cnt = 0.0;
                for &(a, b) in &EDGES {
                    let (va, vb) = (vals[a], vals[b]);
                    if (va >= iso) != (vb >= iso) {
                        let t = (iso - va) / (vb - va);
                        let pa = Vec3::new(CORNERS[a][0] as f64, CORNERS[a][1] as f64, CORNERS[a][2] as f64);
                        let pb = Vec3::new(CORNERS[b][0] as f64, CORNERS[b][1] as f64, CORNERS[b][2] as f64);
                        acc += pa + (pb - pa) * t;
                        cnt += 1.0;
                    }
                }
                let local = acc / cnt;
                let p = o + (Vec3::new(i as f64, j as f64, k as f64) + local) * h;
                cell_vertex[cell_index(i, j, k)] = mesh.vertices.len() as u32;
                mesh.vertices.push(p);
            }
        }
    }
    if mesh.vertices.is_empty() {
        return Err(SplatError::EmptySurface);
    }
    // lattice edge from sample p to p + e_a, shared by four cells
    for k in -1..=nz {
        for j in -1..=ny {
            for i in -1..=nx {
                for a in 0..3 {
                    let p = [i, j, k];
                    let mut q = p;
                    q[a] += 1;
                    let (ip, iq) = (inside(p[0], p[1], p[2]), inside(q[0], q[1], q[2]));
                    if ip == iq {
                        continue;
                    }
                    let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                    let mut quad = [0u32; 4];
                    let mut ok = true;
                    for (slot, (db, dc)) in [(-1, -1), (0, -1), (0, 0), (-1, 0)].into_iter().enumerate() {
                        let mut cell = p;
                        cell[b] += db;
                        cell[c] += dc;
                        let valid = (0..3).all(|x| cell[x] >= -1 && cell[x] < [nx, ny, nz][x]);
                        let id = if valid { cell_vertex[cell_index(cell[0], cell[1], cell[2])] } else { NONE };
                        if id == NONE {
                            ok = false;
                            break;
                        }
                        quad[slot] = id;
                    }
                    if !ok {
                        continue;
                    }
                    if !ip {
                        quad.reverse();
                    }
                    emit_quad(&mut mesh, quad);
                }
            }
        }
    }
    Ok(mesh)
}

/// Split a quad along its shorter diagonal; drop zero-area halves.
fn emit_quad(mesh: &mut TriMesh, q: [u32; 4]) {
    let p = q.map(|i| mesh.vertices[i as usize]);
    let tris = if (p[0] - p[2]).norm() <= (p[1] - p[3]).norm() {
        [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]
    } else {
        [[q[0], q[1], q[3]], [q[1], q[2], q[3]]]
    };
    for t in tris {
        if mesh.area(&t) > 1e-12 {
            mesh.triangles.push(t);
        }
    }
}
