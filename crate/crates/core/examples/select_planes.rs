//! Pick evenly spaced planes out of a dense stack of candidates. The relaxed
//! objective is a lower bound on the binary one.
//!
//!     cargo run --release --example select_planes -- [gamma] [epsilon]

use lamina::fixtures::{axis_plane, constant_field};
use lamina::selector::{select, SelectParams};
use lamina::tracer::StreamSurface;
use lamina::Vec3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let gamma: f64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(10.0);
    let eps: f64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(0.1);

    let g = constant_field([4, 4, 100], 1.0, [0.5; 3]);
    let hi = g.spec().max_corner();
    let candidates: Vec<StreamSurface> = (0..100)
        .map(|z| axis_plane(z, 2, z as f64, Vec3::zeros(), hi, 0.5))
        .collect();

    let sel = select(&candidates, &g, None, &SelectParams::new(gamma, eps, 1))?;
    let r = &sel.report;
    println!(
        "{} candidates, {} probes: relaxed {:.1}, binary {:.1}, {:.0}% fixed by the relaxation",
        r.n_s,
        r.n_p,
        r.relaxed_objective,
        r.binary_objective,
        100.0 * r.fixed_fraction
    );
    let z: Vec<f64> = sel.selected().iter().map(|&i| candidates[i].points[0].z).collect();
    println!("selected planes at z = {z:?}");
    let gaps: Vec<f64> = z.windows(2).map(|w| w[1] - w[0]).collect();
    println!("gaps {gaps:?}");
    Ok(())
}
