//! One cube per twist-continuum vertex, glued along twist-continuum edges.

use nalgebra::{Matrix3, SVD};

use super::graph::StcGraph;
use super::quality::{nonconforming, scaled_jacobian};
use super::{HexError, HexMesh};
use crate::Vec3;

/// Corner signs in VTK hexahedron order.
pub const CORNER_SIGNS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Faces as corner cycles, indexed by `2 * axis + (positive side)`.
pub const FACES: [[usize; 4]; 6] = [
    [0, 3, 7, 4],
    [1, 2, 6, 5],
    [0, 1, 5, 4],
    [3, 2, 6, 7],
    [0, 1, 2, 3],
    [4, 5, 6, 7],
];

fn face_normal(r: &Matrix3<f64>, f: usize) -> Vec3 {
    let s = if f % 2 == 1 { 1.0 } else { -1.0 };
    r.column(f / 2) * s
}

/// Proper rotation closest to `m` in the Frobenius norm.
fn polar_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = SVD::new(*m, true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = (u * vt).determinant().signum();
    u * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * vt
}

/// Rotation whose signed axes best match the unit `dirs`. Each direction is
/// assigned to the nearest signed axis, then the rotation is refitted.
pub fn fit_rotation(dirs: &[Vec3]) -> Matrix3<f64> {
    let mut r = initial_frame(dirs);
    for _ in 0..8 {
        let mut m = Matrix3::zeros();
        for u in dirs {
            let proj = r.transpose() * u;
            let a = proj.iamax();
            let mut x = Vec3::zeros();
            x[a] = proj[a].signum();
            m += u * x.transpose();
        }
        let next = polar_rotation(&m);
        if (next - r).norm() < 1e-14 {
            return next;
        }
        r = next;
    }
    r
}

/// Gram-Schmidt on the first direction and the one most orthogonal to it.
fn initial_frame(dirs: &[Vec3]) -> Matrix3<f64> {
    let Some(a) = dirs.first() else {
        return Matrix3::identity();
    };
    let b = dirs
        .iter()
        .map(|d| d - a * a.dot(d))
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
        .filter(|b| b.norm() > 1e-6)
        .unwrap_or_else(|| {
            let e = if a.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            e - a * a.dot(&e)
        })
        .normalize();
    Matrix3::from_columns(&[*a, b, a.cross(&b)])
}

/// Groups of identified cube corners. A valid group holds at most eight
/// corners, all from different cells.
struct CornerSets {
    parent: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl CornerSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            members: (0..n).map(|c| vec![c]).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    /// Identify every pair, or none of them if a group would become invalid.
    fn try_glue(&mut self, pairs: &[(usize, usize); 4]) -> bool {
        let roots: Vec<(usize, usize)> = pairs.iter().map(|&(a, b)| (self.find(a), self.find(b))).collect();
        // simulate the unions over the few roots involved
        let mut local: Vec<usize> = roots.iter().flat_map(|&(a, b)| [a, b]).collect();
        local.sort_unstable();
        local.dedup();
        let mut up: Vec<usize> = (0..local.len()).collect();
        fn top(up: &mut [usize], mut i: usize) -> usize {
            while up[i] != i {
                i = up[i];
            }
            i
        }
        let at = |r: usize| local.binary_search(&r).unwrap();
        for &(a, b) in &roots {
            let (x, y) = (top(&mut up, at(a)), top(&mut up, at(b)));
            up[x.max(y)] = x.min(y);
        }
        for t in 0..local.len() {
            if top(&mut up, t) != t {
                continue;
            }
            let mut cells: Vec<usize> = (0..local.len())
                .filter(|&u| top(&mut up, u) == t)
                .flat_map(|u| self.members[local[u]].iter().map(|c| c / 8))
                .collect();
            let n = cells.len();
            cells.sort_unstable();
            cells.dedup();
            if n > 8 || cells.len() < n {
                return false;
            }
        }
        for &(a, b) in pairs {
            let (a, b) = (self.find(a), self.find(b));
            if a == b {
                continue;
            }
            // smaller root wins so the result is order independent
            let (keep, gone) = (a.min(b), a.max(b));
            self.parent[gone] = keep;
            let moved = std::mem::take(&mut self.members[gone]);
            self.members[keep].extend(moved);
        }
        true
    }
}

/// Mean normal of each of the three main surfaces among a cluster's members.
fn cluster_normals(stc: &StcGraph, v: usize) -> Vec<(u32, Vec3)> {
    let g = &stc.graph;
    let c = &stc.vertices[v];
    c.surfaces
        .iter()
        .take(3)
        .filter_map(|&s| {
            let mut acc = Vec3::zeros();
            let mut first: Option<Vec3> = None;
            for &m in &c.members {
                if g.surface[m as usize] != s {
                    continue;
                }
                let n = g.normals[m as usize];
                let f = *first.get_or_insert(n);
                acc += if n.dot(&f) < 0.0 { -n } else { n };
            }
            (acc.norm() > 1e-12).then(|| (s, acc.normalize()))
        })
        .collect()
}

/// Frame of a cube and, when three surface normals are known, the surface
/// each axis crosses. Falls back to fitting edge directions and normals.
fn cell_frame(stc: &StcGraph, v: usize, dirs: &[Vec3]) -> (Matrix3<f64>, Vec<u32>) {
    let normals = cluster_normals(stc, v);
    if normals.len() == 3 {
        let mut m = Matrix3::from_columns(&[normals[0].1, normals[1].1, normals[2].1]);
        if m.determinant() < 0.0 {
            m.set_column(2, &-normals[2].1);
        }
        if m.determinant() > 0.1 {
            return (polar_rotation(&m), normals.iter().map(|n| n.0).collect());
        }
    }
    let mut all = dirs.to_vec();
    all.extend(normals.iter().map(|n| n.1));
    (fit_rotation(&all), Vec::new())
}

/// Cubes placed at every twist-continuum vertex, before gluing.
struct Cubes {
    rotations: Vec<Matrix3<f64>>,
    /// Surface crossed by each axis, when the frame came from normals.
    axis_surface: Vec<Vec<u32>>,
    corners: Vec<Vec3>,
}

fn place_cubes(stc: &StcGraph) -> Cubes {
    let nv = stc.vertices.len();
    let inc = stc.incident();
    let pos: Vec<Vec3> = stc.vertices.iter().map(|v| v.position).collect();
    let global_len = if stc.edges.is_empty() {
        4.0 * stc.graph.r
    } else {
        stc.edges.iter().map(|&(a, b)| (pos[b as usize] - pos[a as usize]).norm()).sum::<f64>()
            / stc.edges.len() as f64
    };
    let mut cubes = Cubes {
        rotations: Vec::with_capacity(nv),
        axis_surface: Vec::with_capacity(nv),
        corners: Vec::with_capacity(8 * nv),
    };
    for v in 0..nv {
        let dirs: Vec<Vec3> = inc[v]
            .iter()
            .filter_map(|&u| (pos[u as usize] - pos[v]).try_normalize(1e-12))
            .collect();
        let (r, crossed) = cell_frame(stc, v, &dirs);
        let len = if inc[v].is_empty() {
            global_len
        } else {
            inc[v].iter().map(|&u| (pos[u as usize] - pos[v]).norm()).sum::<f64>() / inc[v].len() as f64
        };
        for s in CORNER_SIGNS {
            cubes.corners.push(pos[v] + r * Vec3::from(s) * (0.5 * len));
        }
        cubes.rotations.push(r);
        cubes.axis_surface.push(crossed);
    }
    cubes
}

/// Glue the cubes of the `active` vertices along the edges between them.
/// Also flags active vertices whose cube could not be glued consistently.
fn glue(stc: &StcGraph, cubes: &Cubes, active: &[bool]) -> (HexMesh, Vec<bool>) {
    let nv = stc.vertices.len();
    let pos: Vec<Vec3> = stc.vertices.iter().map(|v| v.position).collect();
    let mut uf = CornerSets::new(8 * nv);
    let mut used = vec![[false; 6]; nv];
    let mut faulty = vec![false; nv];
    let mut diagnostics = Vec::new();
    for &(a, b) in &stc.edges {
        let (a, b) = (a as usize, b as usize);
        if !active[a] || !active[b] {
            continue;
        }
        let d = pos[b] - pos[a];
        // The edge follows the curve of the two shared surfaces and leaves
        // through the face crossing the surface only one side sees.
        let best = |h: usize, other: usize, dir: Vec3| {
            let own = &cubes.axis_surface[h];
            let theirs = &stc.vertices[other].surfaces;
            let only: Vec<usize> = (0..own.len()).filter(|&k| !theirs[..theirs.len().min(3)].contains(&own[k])).collect();
            if let [k] = only[..] {
                let positive = cubes.rotations[h].column(k).dot(&dir) > 0.0;
                return 2 * k + positive as usize;
            }
            (0..6)
                .max_by(|&x, &y| {
                    let r = &cubes.rotations[h];
                    face_normal(r, x).dot(&dir).total_cmp(&face_normal(r, y).dot(&dir))
                })
                .unwrap()
        };
        let (fa, fb) = (best(a, b, d), best(b, a, -d));
        if used[a][fa] || used[b][fb] {
            diagnostics.push(format!("face conflict on edge ({a}, {b}); kept the earlier pairing"));
            continue;
        }
        if !uf.try_glue(&match_faces(&cubes.corners, a, FACES[fa], b, FACES[fb])) {
            diagnostics.push(format!("gluing edge ({a}, {b}) would merge corners of one cell; skipped"));
            continue;
        }
        used[a][fa] = true;
        used[b][fb] = true;
    }
    let cells_of: Vec<usize> = (0..nv).filter(|&v| active[v]).collect();
    // compact clusters in corner order
    let mut slot = vec![usize::MAX; 8 * nv];
    let mut sums: Vec<(Vec3, usize)> = Vec::new();
    for &v in &cells_of {
        for c in 8 * v..8 * v + 8 {
            let root = uf.find(c);
            if slot[root] == usize::MAX {
                slot[root] = sums.len();
                sums.push((Vec3::zeros(), 0));
            }
            let s = &mut sums[slot[root]];
            s.0 += cubes.corners[c];
            s.1 += 1;
        }
    }
    if let Some(big) = sums.iter().map(|s| s.1).max().filter(|&n| n > 8) {
        diagnostics.push(format!("corner cluster of size {big}"));
    }
    let vertices = sums.iter().map(|(p, n)| p / *n as f64).collect();
    let cells: Vec<[u32; 8]> = cells_of
        .iter()
        .map(|&v| std::array::from_fn(|k| slot[uf.find(8 * v + k)] as u32))
        .collect();
    for (h, c) in cells.iter().enumerate() {
        let mut s = c.to_vec();
        s.sort_unstable();
        s.dedup();
        if s.len() < 8 {
            diagnostics.push(format!("cell {h} has merged corners"));
            faulty[cells_of[h]] = true;
        }
        if c.iter().any(|&k| sums[k as usize].1 > 8) {
            faulty[cells_of[h]] = true;
        }
    }
    let mesh = HexMesh {
        vertices,
        cells,
        dual_of: cells_of.iter().map(|&v| v as u32).collect(),
        diagnostics,
    };
    let (_, overlapping) = nonconforming(&mesh);
    for (h, &o) in overlapping.iter().enumerate() {
        let inverted = scaled_jacobian(&mesh.cell_points(h)).map_or(true, |q| q <= 0.0);
        faulty[cells_of[h]] |= o || inverted;
    }
    (mesh, faulty)
}

/// Hexahedral mesh dual to the twist continuum, one cell per vertex.
pub fn dualize(stc: &StcGraph) -> Result<HexMesh, HexError> {
    if stc.vertices.is_empty() {
        return Err(HexError::NoTripleIntersections);
    }
    let cubes = place_cubes(stc);
    Ok(glue(stc, &cubes, &vec![true; stc.vertices.len()]).0)
}

/// Like [`dualize`], but cells that cannot be glued into a valid mesh are
/// removed and the rest glued again until none remain: cells with merged
/// corners, cells at a corner shared by more than eight cells, inverted cells
/// and cells overlapping a neighbour without sharing a whole face. Where the
/// surfaces do not form a clean twist continuum this leaves gaps. Returns the
/// mesh and the number of removed cells.
pub fn dualize_with_gaps(stc: &StcGraph) -> Result<(HexMesh, usize), HexError> {
    if stc.vertices.is_empty() {
        return Err(HexError::NoTripleIntersections);
    }
    let cubes = place_cubes(stc);
    let mut active = vec![true; stc.vertices.len()];
    loop {
        let (mut mesh, faulty) = glue(stc, &cubes, &active);
        if !faulty.iter().any(|&f| f) {
            let removed = active.iter().filter(|&&a| !a).count();
            if removed > 0 {
                mesh.diagnostics.push(format!("removed {removed} cells that could not be glued"));
            }
            return Ok((mesh, removed));
        }
        for (a, f) in active.iter_mut().zip(faulty) {
            *a &= !f;
        }
    }
}

/// Corner correspondence between two faces: the cyclic alignment, in either
/// winding, with the least squared mismatch of centred corner positions.
fn match_faces(corners: &[Vec3], a: usize, fa: [usize; 4], b: usize, fb: [usize; 4]) -> [(usize, usize); 4] {
    let pa = fa.map(|k| corners[8 * a + k]);
    let pb = fb.map(|k| corners[8 * b + k]);
    let ca = pa.iter().sum::<Vec3>() / 4.0;
    let cb = pb.iter().sum::<Vec3>() / 4.0;
    let mut best = (f64::INFINITY, [0usize; 4]);
    for shift in 0..4 {
        for rev in [false, true] {
            let perm: [usize; 4] = std::array::from_fn(|i| if rev { (shift + 4 - i) % 4 } else { (shift + i) % 4 });
            let cost: f64 = (0..4).map(|i| ((pa[i] - ca) - (pb[perm[i]] - cb)).norm_squared()).sum();
            if cost < best.0 {
                best = (cost, perm);
            }
        }
    }
    std::array::from_fn(|i| (8 * a + fa[i], 8 * b + fb[best.1[i]]))
}
