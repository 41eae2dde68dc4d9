//! Hex-mesh a cylindrical frame field stage by stage and print what each
//! stage produced.
//!
//!     cargo run --release --example cylinder_hexmesh -- [size] [out.vtk]

use std::time::Instant;

use lamina::pipeline::{
    hexmesh_stage, singular_mask, supersample_all, trace_candidates, FieldSource, GeneratorSpec, PipelineConfig,
};
use lamina::selector::select;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(48);
    let out = args.next();

    let cfg = PipelineConfig {
        field: FieldSource::Generator(GeneratorSpec::new("cylinder", [n; 3])),
        ..PipelineConfig::default()
    };
    let FieldSource::Generator(spec) = &cfg.field else { unreachable!() };
    let g = spec.generate(cfg.thresholds())?;
    let mask = singular_mask(&g, &cfg);

    let t = Instant::now();
    let candidates = trace_candidates(&g, &mask, &cfg)?;
    println!("traced {} candidates in {:.1}s", candidates.len(), t.elapsed().as_secs_f64());

    let sel = select(&candidates, &g, Some(&mask), &cfg.select_params())?;
    let chosen: Vec<_> = sel.selected().iter().map(|&i| candidates[i].clone()).collect();
    println!("selected {} surfaces, objective {}", chosen.len(), sel.report.binary_objective);

    let fine = supersample_all(&g, &mask, &chosen, &cfg);
    let hex = hexmesh_stage(&fine, cfg.r_fine)?;
    let q = &hex.quality;
    println!(
        "{} hexahedra on {} vertices; scaled Jacobian min {:.3} mean {:.3}",
        q.cell_count, q.vertex_count, q.min_scaled_jacobian, q.mean_scaled_jacobian
    );
    println!("{} points near the axis dropped", hex.dropped_points);
    for d in &hex.mesh.diagnostics {
        println!("  {d}");
    }
    if let Some(path) = out {
        hex.mesh.write_vtk(&path)?;
        println!("wrote {path}");
    }
    Ok(())
}
