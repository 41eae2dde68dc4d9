//! Hexahedral meshing from intersecting surfaces.
//!
//! Surface points closer than `2r` are linked into a proximity graph. Points
//! that see three surfaces form clusters, one per twist-continuum vertex;
//! clusters are linked along the two-surface intersection curves between
//! them. Each vertex becomes a cube, and cubes joined by an edge share a face.
//!
//! Cells use VTK hexahedron ordering: corners 0..4 on the bottom face counter
//! clockwise seen from above, corners 4..8 directly above them.

mod dual;
mod graph;
mod io;
mod quality;

use thiserror::Error;

use crate::tracer::StreamSurface;
use crate::Vec3;

pub use dual::{dualize, dualize_with_gaps, fit_rotation, CORNER_SIGNS, FACES};
pub use graph::{build_proximity_graph, build_proximity_graph_pruned, build_stc, classify_vertices, PointClass, ProximityGraph, StcGraph, StcVertex};
pub use quality::{mesh_quality_report, nonconforming_faces, scaled_jacobian, QualityReport, CORNER_NEIGHBORS};

#[derive(Debug, Error)]
pub enum HexError {
    #[error("point at {point:?} is near surfaces {surfaces:?}; surfaces closer than 4r")]
    SeparationViolation { point: [f64; 3], surfaces: Vec<u32> },
    #[error("no triple intersections; nothing to dualize")]
    NoTripleIntersections,
    #[error("cell has coincident corners")]
    DegenerateCell,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HexMesh {
    pub vertices: Vec<Vec3>,
    pub cells: Vec<[u32; 8]>,
    /// Twist-continuum vertex each cell is dual to.
    pub dual_of: Vec<u32>,
    /// Problems met while gluing cells, such as a face claimed twice.
    pub diagnostics: Vec<String>,
}

impl HexMesh {
    pub fn cell_points(&self, c: usize) -> [Vec3; 8] {
        self.cells[c].map(|i| self.vertices[i as usize])
    }
}

/// Graph, classification, twist continuum and dual mesh in one call.
pub fn hex_mesh(surfaces: &[StreamSurface], r: f64) -> Result<(StcGraph, HexMesh), HexError> {
    let g = build_proximity_graph(surfaces, r)?;
    let classes = classify_vertices(&g);
    let stc = build_stc(g, classes)?;
    let mesh = dualize(&stc)?;
    Ok((stc, mesh))
}

/// [`hex_mesh`] after dropping points that break the separation condition,
/// dualized with [`dualize_with_gaps`]. Also returns the number of dropped
/// points; removed cells show as twist-continuum vertices without a cell.
pub fn hex_mesh_pruned(surfaces: &[StreamSurface], r: f64) -> Result<(StcGraph, HexMesh, usize), HexError> {
    let (g, dropped) = build_proximity_graph_pruned(surfaces, r)?;
    let classes = classify_vertices(&g);
    let stc = build_stc(g, classes)?;
    let (mesh, _) = dualize_with_gaps(&stc)?;
    Ok((stc, mesh, dropped))
}

#[cfg(test)]
mod tests;
