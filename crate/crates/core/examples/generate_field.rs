//! Generate one of the closed-form frame fields, save it and summarize the
//! rotation energy that the singularity detector works from.
//!
//!     cargo run --release --example generate_field -- [cylinder|helicoid|singularity2d] [size] [out.ffield]

use lamina::field::{save_field, Thresholds};
use lamina::pipeline::GeneratorSpec;
use lamina::singularity::rotation_energy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "cylinder".into());
    let n: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(32);
    let out = args.next();

    let g = GeneratorSpec::new(&name, [n; 3]).generate(Thresholds::default())?;
    let [void, solid, intermediate] = g.class_histogram();
    println!("{name} field, {:?} voxels: {void} void, {intermediate} intermediate, {solid} solid", g.dims());

    let energy = rotation_energy(&g);
    let mut sorted = energy.values.clone();
    sorted.sort_by(f64::total_cmp);
    let pct = |q: f64| sorted[((sorted.len() - 1) as f64 * q) as usize];
    println!(
        "rotation energy: median {:.4}, 99th percentile {:.4}, max {:.4}",
        pct(0.5),
        pct(0.99),
        pct(1.0)
    );
    if let Some(path) = out {
        save_field(&g, &path)?;
        println!("wrote {path}");
    }
    Ok(())
}
