use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use lamina::field::{save_field, FrameGrid};
use lamina::pipeline::{
    self, files, load_or_generate, AtStage, FieldSource, GeneratorSpec, OutputKind, PipelineConfig, PipelineError,
    Stage,
};
use lamina::selector::select;
use lamina::tracer::io::{field_hash, read_surface_set, write_surface_set, SurfaceManifest};
use lamina::tracer::StreamSurface;

#[derive(Parser)]
#[command(name = "lamina", version, about = "Frame-aligned multi-laminar structures from frame fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic frame field.
    GenField {
        /// cylinder, helicoid or singularity2d
        generator: String,
        #[arg(long, value_parser = parse_dims, default_value = "64,64,64")]
        dims: [usize; 3],
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
        /// Helicoid twist: climb angle atan(pitch * rho). Defaults to 45
        /// degrees at a quarter of the smaller lateral extent.
        #[arg(long)]
        pitch: Option<f64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Trace candidate stream surfaces.
    Trace {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Candidate count; derived from the domain when absent.
        #[arg(long)]
        n_surfaces: Option<usize>,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Select an evenly spaced subset of traced surfaces.
    Select {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        surfaces: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Splat surfaces into a voxel volume and extract its iso-surface.
    Splat {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        surfaces: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Dualize intersecting surfaces into a hexahedral mesh.
    Hexmesh {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        surfaces: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Run every stage.
    Pipeline {
        /// Field file; overrides the config's field source.
        #[arg(long, conflicts_with = "generator")]
        field: Option<PathBuf>,
        /// Generator name; overrides the config's field source.
        #[arg(long)]
        generator: Option<String>,
        #[arg(long, value_parser = parse_dims)]
        dims: Option<[usize; 3]>,
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        output: Option<Output>,
        #[arg(long)]
        n_surfaces: Option<usize>,
        #[command(flatten)]
        knobs: Knobs,
    },
}

fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| format!("not a size: {x:?}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<usize>| format!("expected 3 sizes, got {}", v.len()))
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Output {
    Splat,
    Hexmesh,
    Both,
}

/// Shared parameters. Flags override the JSON config, which overrides the
/// defaults.
#[derive(Args)]
struct Knobs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    radius_fine: Option<f64>,
    #[arg(long)]
    k_sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out_dims: Option<usize>,
    #[arg(long)]
    iso: Option<f64>,
}

impl Knobs {
    fn config(&self) -> Result<PipelineConfig, PipelineError> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p).at(Stage::Config)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { c.$field = v; })*
            };
        }
        set!(gamma => gamma, epsilon => epsilon, radius => r, radius_fine => r_fine, k_sigma => k_sigma,
             seed => rng_seed, out_dims => out_dims, iso => iso);
        if self.threads.is_some() {
            c.threads = self.threads;
        }
        c.validate().at(Stage::Config)?;
        if let Some(n) = c.threads {
            // only fails if a pool already exists, which cannot happen here
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Ok(c)
    }
}

fn load(path: &Path, cfg: &PipelineConfig) -> Result<FrameGrid, PipelineError> {
    load_or_generate(&FieldSource::File { path: path.into() }, cfg.thresholds()).at(Stage::Field)
}

fn timed<T>(label: &str, f: impl FnOnce() -> Result<T, PipelineError>) -> Result<T, PipelineError> {
    let t = Instant::now();
    let out = f()?;
    println!("{label:<16}{:>10.3} s", t.elapsed().as_secs_f64());
    Ok(out)
}

/// Surfaces at `r_fine`, super-sampling them first if they are coarser.
fn fine_surfaces(
    g: &FrameGrid,
    cfg: &PipelineConfig,
    surfaces: Vec<StreamSurface>,
) -> Result<Vec<StreamSurface>, PipelineError> {
    if surfaces.iter().all(|s| s.r <= cfg.r_fine) {
        return Ok(surfaces);
    }
    timed("super-sampling", || {
        let mask = pipeline::singular_mask(g, cfg);
        Ok(pipeline::supersample_all(g, &mask, &surfaces, cfg))
    })
}

fn run(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::GenField {
            generator,
            dims,
            spacing,
            pitch,
            out,
        } => {
            let spec = GeneratorSpec {
                spacing,
                pitch,
                ..GeneratorSpec::new(&generator, dims)
            };
            let g = spec.generate(Default::default()).at(Stage::Field)?;
            save_field(&g, &out).at(Stage::Field)?;
            let [void, solid, inter] = g.class_histogram();
            println!("dims {:?}", g.dims());
            println!("void {void}, solid {solid}, intermediate {inter}");
        }
        Command::Trace {
            field,
            out,
            n_surfaces,
            knobs,
        } => {
            let mut cfg = knobs.config()?;
            cfg.n_surfaces = n_surfaces.or(cfg.n_surfaces);
            let g = load(&field, &cfg)?;
            let mask = timed("singular mask", || Ok(pipeline::singular_mask(&g, &cfg)))?;
            let surfaces = timed("trace", || pipeline::trace_candidates(&g, &mask, &cfg).at(Stage::Trace))?;
            let manifest = SurfaceManifest {
                r: cfg.r,
                r_fine: None,
                field_hash: field_hash(&g),
                surface_ids: surfaces.iter().map(|s| s.id).collect(),
            };
            write_surface_set(&out, &surfaces, &manifest).at(Stage::Trace)?;
            println!("{} surfaces, {} points", surfaces.len(), surfaces.iter().map(StreamSurface::len).sum::<usize>());
        }
        Command::Select {
            field,
            surfaces,
            out,
            knobs,
        } => {
            let cfg = knobs.config()?;
            let g = load(&field, &cfg)?;
            let (manifest, candidates) = read_surface_set(&surfaces).at(Stage::Select)?;
            let mask = pipeline::singular_mask(&g, &cfg);
            let sel = timed("selection", || select(&candidates, &g, Some(&mask), &cfg.select_params()).at(Stage::Select))?;
            let chosen: Vec<StreamSurface> = sel.selected().iter().map(|&i| candidates[i].clone()).collect();
            let pruned = SurfaceManifest {
                surface_ids: chosen.iter().map(|s| s.id).collect(),
                ..manifest
            };
            write_surface_set(&out, &chosen, &pruned).at(Stage::Select)?;
            let json = serde_json::to_string_pretty(&sel.report).map_err(std::io::Error::other).at(Stage::Select)?;
            std::fs::write(out.join(files::SELECTION), json + "\n").at(Stage::Select)?;
            println!(
                "selected {} of {}; objective {} (relaxed {})",
                chosen.len(),
                candidates.len(),
                sel.report.binary_objective,
                sel.report.relaxed_objective
            );
        }
        Command::Splat {
            field,
            surfaces,
            out,
            knobs,
        } => {
            let cfg = knobs.config()?;
            let g = load(&field, &cfg)?;
            let (_, surfaces) = read_surface_set(&surfaces).at(Stage::Splat)?;
            let surfaces = fine_surfaces(&g, &cfg, surfaces)?;
            let (vol, mesh) = timed("output", || pipeline::splat_stage(&g, &surfaces, &cfg).at(Stage::Splat))?;
            std::fs::create_dir_all(&out).at(Stage::Splat)?;
            vol.write_vvol(out.join(files::VOLUME)).at(Stage::Splat)?;
            mesh.write_obj(out.join(files::SURFACE_MESH)).at(Stage::Splat)?;
            println!("volume {:?}, {} triangles", vol.spec.dims, mesh.triangles.len());
        }
        Command::Hexmesh {
            field,
            surfaces,
            out,
            knobs,
        } => {
            let cfg = knobs.config()?;
            let g = load(&field, &cfg)?;
            let (_, surfaces) = read_surface_set(&surfaces).at(Stage::Hexmesh)?;
            let surfaces = fine_surfaces(&g, &cfg, surfaces)?;
            let h = timed("output", || pipeline::hexmesh_stage(&surfaces, cfg.r_fine).at(Stage::Hexmesh))?;
            std::fs::create_dir_all(&out).at(Stage::Hexmesh)?;
            h.mesh.write_vtk(out.join(files::HEX_VTK)).at(Stage::Hexmesh)?;
            h.mesh.write_medit(out.join(files::HEX_MEDIT)).at(Stage::Hexmesh)?;
            h.quality.write_json(out.join(files::QUALITY)).at(Stage::Hexmesh)?;
            print_quality(&h);
        }
        Command::Pipeline {
            field,
            generator,
            dims,
            out,
            output,
            n_surfaces,
            knobs,
        } => {
            let mut cfg = knobs.config()?;
            if let Some(path) = field {
                cfg.field = FieldSource::File { path };
            }
            if let Some(name) = generator {
                cfg.field = FieldSource::Generator(GeneratorSpec::new(&name, dims.unwrap_or([32; 3])));
            } else if let (Some(d), FieldSource::Generator(spec)) = (dims, &mut cfg.field) {
                spec.dims = d;
            }
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            if let Some(o) = output {
                cfg.output = match o {
                    Output::Splat => OutputKind::Splat,
                    Output::Hexmesh => OutputKind::Hexmesh,
                    Output::Both => OutputKind::Both,
                };
            }
            if n_surfaces.is_some() {
                cfg.n_surfaces = n_surfaces;
            }
            let result = pipeline::run_pipeline(&cfg)?;
            print!("{}", result.timings.table());
            let sel = &result.report.selection;
            println!("selected {} of {} candidates", sel.selected_ids.len(), sel.n_s);
            if let Some(tris) = result.report.triangles {
                println!("surface mesh: {tris} triangles");
            }
            if let Some(h) = &result.hex {
                print_quality(h);
            }
            println!("artifacts in {}", cfg.out_dir.display());
        }
    }
    Ok(())
}

fn print_quality(h: &pipeline::HexOutput) {
    let q = &h.quality;
    println!(
        "{} hexahedra, {} vertices; scaled Jacobian min {:.3} mean {:.3}; {} nonconforming faces",
        q.cell_count, q.vertex_count, q.min_scaled_jacobian, q.mean_scaled_jacobian, q.nonconforming_faces
    );
    if h.dropped_points > 0 {
        println!("{} points dropped for surfaces closer than 4r", h.dropped_points);
    }
    if h.removed_cells > 0 {
        println!("{} cells removed where the surfaces could not be glued", h.removed_cells);
    }
    const SHOWN: usize = 5;
    for d in h.mesh.diagnostics.iter().take(SHOWN) {
        println!("warning: {d}");
    }
    if h.mesh.diagnostics.len() > SHOWN {
        println!("warning: {} more gluing diagnostics", h.mesh.diagnostics.len() - SHOWN);
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
