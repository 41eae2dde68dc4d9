//! Splat a handful of planes into a voxel solid with field-driven thickness
//! and extract its boundary as a triangle mesh.
//!
//!     cargo run --release --example splat_solid -- [gamma] [out.obj]

use lamina::fixtures::{axis_plane, constant_field};
use lamina::splatter::{extract_isosurface, splat_all, surface_thickness, VoxelVolume};
use lamina::Vec3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let gamma: f64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(8.0);
    let out = args.next();

    // thin members along x, thick along z
    let g = constant_field([40, 40, 40], 1.0, [0.2, 0.5, 0.5]);
    let hi = g.spec().max_corner();
    let mut planes = Vec::new();
    for (i, offset) in [8.0, 20.0, 32.0].into_iter().enumerate() {
        planes.push(axis_plane(i as u32, 0, offset, Vec3::zeros(), hi, 0.5));
        planes.push(axis_plane(3 + i as u32, 2, offset, Vec3::zeros(), hi, 0.5));
    }
    let taus = planes
        .iter()
        .map(|s| surface_thickness(&g, s, gamma, 1.0, gamma))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = VoxelVolume::covering(&g, 80)?;
    let vol = splat_all(&planes, &taus, &spec, 0.5)?;
    let filled = vol.values.iter().filter(|&&v| v >= 0.5).count();
    println!(
        "{} voxels, {:.1}% solid; thickness {} across x planes and {} across z planes",
        vol.values.len(),
        100.0 * filled as f64 / vol.values.len() as f64,
        taus[0][0],
        taus[3][0]
    );

    let mesh = extract_isosurface(&vol, 0.5)?;
    println!(
        "{} triangles, closed {}, Euler characteristic {}",
        mesh.triangles.len(),
        mesh.is_closed(),
        mesh.euler_characteristic()
    );
    if let Some(path) = out {
        mesh.write_obj(&path)?;
        println!("wrote {path}");
    }
    Ok(())
}
