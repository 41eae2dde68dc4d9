//! Trace a single stream surface around the cylinder axis and report how
//! well it holds its radius before and after smoothing.
//!
//!     cargo run --release --example trace_surface -- [radius] [r] [out.ply]

use lamina::field::{gen_cylinder_field, GeneratorParams};
use lamina::singularity::{detect_singular_voxels, rotation_energy, DetectParams};
use lamina::tracer::io::write_ply;
use lamina::tracer::{smooth_surface, surface_rng, trace_surface, TraceParams};
use lamina::Vec3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let radius: f64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(20.0);
    let r: f64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(2.0);
    let out = args.next();

    let params = GeneratorParams::new([64; 3], 1.0);
    let g = gen_cylinder_field(&params, Vec3::z())?;
    let mask = detect_singular_voxels(&g, &rotation_energy(&g), &DetectParams::for_radius(r));
    let c = params.center();

    // layer 1 is the radial direction, so the surface wraps around the axis
    let tp = TraceParams { smooth: false, ..TraceParams::new(r) };
    let raw = trace_surface(&g, &mask, &(c + Vec3::new(radius, 0.0, 0.0)), 1, &tp, &mut surface_rng(1, 0))?;
    let smoothed = smooth_surface(&g, &raw);

    for (name, s) in [("raw", &raw), ("smoothed", &smoothed)] {
        let err = s
            .points
            .iter()
            .map(|p| ((p - c).xy().norm() - radius).abs())
            .fold(0.0, f64::max);
        println!(
            "{name:>9}: {} points, max radial error {err:.4}, closest pair {:.3}, alignment error {:.2} deg",
            s.len(),
            s.min_pair_distance(),
            s.alignment_error(&g)?.to_degrees()
        );
    }
    if let Some(path) = out {
        write_ply(&smoothed, &path)?;
        println!("wrote {path}");
    }
    Ok(())
}
