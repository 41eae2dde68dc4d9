//! Run every stage from a JSON config, or from the defaults, and print the
//! timing table and report.
//!
//!     cargo run --release --example pipeline -- [config.json]

use lamina::pipeline::{run_pipeline, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let out = run_pipeline(&cfg)?;
    print!("{}", out.timings.table());
    println!("{}", serde_json::to_string_pretty(&out.report)?);
    println!("artifacts in {}", cfg.out_dir.display());
    Ok(())
}
