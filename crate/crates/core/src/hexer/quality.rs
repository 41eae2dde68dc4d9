use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{HexError, HexMesh};
use crate::Vec3;

/// Edge neighbours of each corner, ordered so an undistorted cell gives `+1`.
pub const CORNER_NEIGHBORS: [[usize; 3]; 8] = [
    [1, 3, 4],
    [2, 0, 5],
    [3, 1, 6],
    [0, 2, 7],
    [7, 5, 0],
    [4, 6, 1],
    [5, 7, 2],
    [6, 4, 3],
];

/// Minimum over corners of the determinant of the normalized edge vectors.
pub fn scaled_jacobian(p: &[Vec3; 8]) -> Result<f64, HexError> {
    let mut worst = f64::INFINITY;
    for (i, nb) in CORNER_NEIGHBORS.iter().enumerate() {
        let mut e = [Vec3::zeros(); 3];
        for (k, &j) in nb.iter().enumerate() {
            e[k] = (p[j] - p[i]).try_normalize(1e-12).ok_or(HexError::DegenerateCell)?;
        }
        worst = worst.min(e[0].dot(&e[1].cross(&e[2])));
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub min_scaled_jacobian: f64,
    pub mean_scaled_jacobian: f64,
    pub cell_count: usize,
    pub vertex_count: usize,
    pub degenerate_cells: usize,
    pub nonconforming_faces: usize,
}

/// Aggregate cell quality. Degenerate cells are counted and left out of the
/// statistics; with no valid cell both statistics are zero.
pub fn mesh_quality_report(mesh: &HexMesh) -> QualityReport {
    let values: Vec<f64> = (0..mesh.cells.len())
        .filter_map(|c| scaled_jacobian(&mesh.cell_points(c)).ok())
        .collect();
    let (min, mean) = if values.is_empty() {
        (0.0, 0.0)
    } else {
        (
            values.iter().copied().fold(f64::INFINITY, f64::min),
            values.iter().sum::<f64>() / values.len() as f64,
        )
    };
    QualityReport {
        min_scaled_jacobian: min,
        mean_scaled_jacobian: mean,
        cell_count: mesh.cells.len(),
        vertex_count: mesh.vertices.len(),
        degenerate_cells: mesh.cells.len() - values.len(),
        nonconforming_faces: nonconforming_faces(mesh),
    }
}

fn face_keys(c: &[u32; 8]) -> [[u32; 4]; 6] {
    super::dual::FACES.map(|f| {
        let mut k = f.map(|i| c[i]);
        k.sort_unstable();
        k
    })
}

/// Quads used by more than two cells, plus cell pairs sharing three or more
/// vertices without sharing a whole face.
pub fn nonconforming_faces(mesh: &HexMesh) -> usize {
    nonconforming(mesh).0
}

/// The count of [`nonconforming_faces`] and the cells involved.
pub(crate) fn nonconforming(mesh: &HexMesh) -> (usize, Vec<bool>) {
    let mut involved = vec![false; mesh.cells.len()];
    let mut quads: HashMap<[u32; 4], Vec<usize>> = HashMap::new();
    for (i, c) in mesh.cells.iter().enumerate() {
        for k in face_keys(c) {
            quads.entry(k).or_default().push(i);
        }
    }
    let mut bad = 0;
    for users in quads.values().filter(|u| u.len() > 2) {
        bad += 1;
        users.iter().for_each(|&i| involved[i] = true);
    }
    let mut by_vertex: HashMap<u32, Vec<usize>> = HashMap::new();
    for (i, c) in mesh.cells.iter().enumerate() {
        for &v in c {
            by_vertex.entry(v).or_default().push(i);
        }
    }
    for (i, c) in mesh.cells.iter().enumerate() {
        let mut shared: HashMap<usize, Vec<u32>> = HashMap::new();
        for &v in c {
            for &j in &by_vertex[&v] {
                if j > i {
                    shared.entry(j).or_default().push(v);
                }
            }
        }
        for (j, mut vs) in shared {
            vs.sort_unstable();
            vs.dedup();
            if vs.len() < 3 {
                continue;
            }
            let whole = vs.len() == 4 && {
                let k: [u32; 4] = [vs[0], vs[1], vs[2], vs[3]];
                face_keys(c).contains(&k) && face_keys(&mesh.cells[j]).contains(&k)
            };
            if !whole {
                bad += 1;
                involved[i] = true;
                involved[j] = true;
            }
        }
    }
    (bad, involved)
}
