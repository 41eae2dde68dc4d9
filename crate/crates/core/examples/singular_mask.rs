//! Detect the singular curve of the embedded index 1 field and draw the
//! dilated mask of the middle slice as text.
//!
//!     cargo run --release --example singular_mask -- [size] [dilation]

use lamina::field::{gen_embedded_singularity_field, GeneratorParams};
use lamina::singularity::{detect_singular_voxels, rotation_energy, DetectParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(33);
    let dilation: f64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(4.0);

    let g = gen_embedded_singularity_field(&GeneratorParams::new([n, n, 5], 1.0), 1)?;
    let params = DetectParams {
        dilation_radius: dilation,
        ..DetectParams::for_radius(2.0)
    };
    let mask = detect_singular_voxels(&g, &rotation_energy(&g), &params);
    let core = mask.core().iter().filter(|&&c| c).count();
    println!(
        "threshold {:.4}: {core} core voxels, {} after dilating by {dilation}",
        mask.threshold,
        mask.count()
    );

    let spec = g.spec();
    for j in (0..n).rev() {
        let row: String = (0..n)
            .map(|i| {
                let idx = spec.index(i, j, 2);
                match (mask.core()[idx], mask.excluded()[idx]) {
                    (true, _) => '#',
                    (false, true) => '+',
                    _ => '.',
                }
            })
            .collect();
        println!("{row}");
    }
    Ok(())
}
