//! Hex-mesh synthetic planes: the two-cell configuration and stacks of
//! `k + 1` planes per axis, which come out as structured grids.
//!
//!     cargo run --release --example hexmesh_planes -- [k] [out.vtk]

use lamina::fixtures::{plane_stack, two_cell_planes};
use lamina::hexer::{hex_mesh, mesh_quality_report};
use lamina::Vec3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(2);
    let out = args.next();

    let (stc, mesh) = hex_mesh(&two_cell_planes(8.0, 1.0), 1.0)?;
    println!(
        "two-cell planes: {} twist-continuum vertices, {} edges, {} hexahedra",
        stc.vertices.len(),
        stc.edges.len(),
        mesh.cells.len()
    );

    let (stc, mesh) = hex_mesh(&plane_stack(k, 8.0, 1.0, Vec3::zeros()), 1.0)?;
    let q = mesh_quality_report(&mesh);
    println!(
        "stack of {} planes per axis: {} vertices and {} edges in the twist continuum",
        k + 1,
        stc.vertices.len(),
        stc.edges.len()
    );
    println!(
        "{} hexahedra on {} vertices; scaled Jacobian min {:.3} mean {:.3}; {} nonconforming faces",
        q.cell_count, q.vertex_count, q.min_scaled_jacobian, q.mean_scaled_jacobian, q.nonconforming_faces
    );
    if let Some(path) = out {
        mesh.write_vtk(&path)?;
        println!("wrote {path}");
    }
    Ok(())
}
