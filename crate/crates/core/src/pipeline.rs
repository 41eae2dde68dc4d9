//! End-to-end runs: field, singular mask, tracing, selection, super-sampling
//! and output, with per-stage timing.
//!
//! Every stage is a plain function of its inputs so the command line tool can
//! run them one at a time from files, and [`run_pipeline`] can chain them in
//! memory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{
    gen_cylinder_field, gen_embedded_singularity_field, gen_helicoid_field, load_field_with, FieldError, FrameGrid,
    GeneratorParams, Thresholds,
};
use crate::hexer::{hex_mesh_pruned, mesh_quality_report, HexError, HexMesh, QualityReport};
use crate::selector::{cardinalities, select, SelectError, SelectParams, Selection, SelectionReport};
use crate::singularity::{detect_singular_voxels, rotation_energy, DetectParams, SingularMask};
use crate::splatter::{
    extract_isosurface, fill_solid_regions, splat_all, surface_thickness, SplatError, TriMesh, VoxelVolume,
};
use crate::tracer::io::{field_hash, write_surface_set, SurfaceManifest};
use crate::tracer::{
    generate_surface_set, supersample_surface, surface_rng, SeedParams, StreamSurface, TraceError, TraceParams,
};
use crate::Vec3;

pub const GENERATORS: [&str; 3] = ["cylinder", "helicoid", "singularity2d"];

/// Where the frame field comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSource {
    File { path: PathBuf },
    Generator(GeneratorSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub generator: String,
    pub dims: [usize; 3],
    #[serde(default = "one")]
    pub spacing: f64,
    /// Helicoid twist: the climb angle at distance `rho` from the axis is
    /// `atan(pitch * rho)`. Defaults to 45 degrees at a quarter of the
    /// smaller lateral extent.
    #[serde(default)]
    pub pitch: Option<f64>,
    #[serde(default = "half")]
    pub thickness: [f64; 3],
}

fn one() -> f64 {
    1.0
}

fn half() -> [f64; 3] {
    [0.5; 3]
}

impl GeneratorSpec {
    pub fn new(generator: &str, dims: [usize; 3]) -> Self {
        Self {
            generator: generator.into(),
            dims,
            spacing: 1.0,
            pitch: None,
            thickness: half(),
        }
    }

    pub fn generate(&self, thresholds: Thresholds) -> Result<FrameGrid, StageError> {
        let params = GeneratorParams {
            dims: self.dims,
            spacing: self.spacing,
            thickness: self.thickness,
        };
        let g = match self.generator.as_str() {
            "cylinder" => gen_cylinder_field(&params, Vec3::z())?,
            "helicoid" => {
                let lateral = self.dims[0].min(self.dims[1]).saturating_sub(1).max(1) as f64 * self.spacing;
                let pitch = self.pitch.unwrap_or(4.0 / lateral);
                gen_helicoid_field(&params, pitch, Vec3::z())?
            }
            "singularity2d" => gen_embedded_singularity_field(&params, 1)?,
            other => return Err(StageError::UnknownGenerator(other.into())),
        };
        Ok(g.reclassified(thresholds))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Splat,
    Hexmesh,
    Both,
}

impl OutputKind {
    pub fn splat(self) -> bool {
        self != OutputKind::Hexmesh
    }

    pub fn hexmesh(self) -> bool {
        self != OutputKind::Splat
    }
}

/// All knobs of a run. Mirrors the JSON config file; missing keys take the
/// defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub field: FieldSource,
    /// Poisson-disk radius for tracing.
    pub r: f64,
    /// Radius after super-sampling; used by the hex mesher and the splats.
    pub r_fine: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub k_sigma: f64,
    pub eps_void: f64,
    pub eps_solid: f64,
    pub rng_seed: u64,
    /// Candidate count; derived from the domain size when absent.
    pub n_surfaces: Option<usize>,
    /// Samples along the longest axis of the output volume.
    pub out_dims: usize,
    pub iso: f64,
    pub output: OutputKind,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            field: FieldSource::Generator(GeneratorSpec::new("cylinder", [32; 3])),
            r: 2.0,
            r_fine: 1.0,
            gamma: 8.0,
            epsilon: 0.4,
            k_sigma: 3.0,
            eps_void: 0.01,
            eps_solid: 0.99,
            rng_seed: 1,
            n_surfaces: None,
            out_dims: 128,
            iso: 0.5,
            output: OutputKind::Both,
            out_dir: PathBuf::from("lamina_out"),
            threads: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, StageError> {
        serde_json::from_str(text).map_err(|e| StageError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StageError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// `r_fine < r <= epsilon * gamma`, `gamma > 0`, `0 < epsilon < 1`.
    pub fn validate(&self) -> Result<(), StageError> {
        let bad = |m: String| Err(StageError::Config(m));
        if !(self.gamma > 0.0) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.r_fine > 0.0 && self.r_fine < self.r) {
            return bad(format!("need 0 < r_fine < r, got r_fine = {}, r = {}", self.r_fine, self.r));
        }
        if self.r > self.epsilon * self.gamma + 1e-12 {
            return bad(format!(
                "r = {} exceeds epsilon * gamma = {}",
                self.r,
                self.epsilon * self.gamma
            ));
        }
        if self.out_dims < 2 {
            return bad(format!("out_dims must be at least 2, got {}", self.out_dims));
        }
        if !(self.eps_void < self.eps_solid) {
            return bad("eps_void must be below eps_solid".into());
        }
        Ok(())
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            eps_void: self.eps_void,
            eps_solid: self.eps_solid,
        }
    }

    pub fn trace_params(&self) -> TraceParams {
        TraceParams::new(self.r)
    }

    pub fn select_params(&self) -> SelectParams {
        SelectParams::new(self.gamma, self.epsilon, self.rng_seed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Field,
    Mask,
    Trace,
    Select,
    Supersample,
    Splat,
    Hexmesh,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(String::from));
        f.write_str(name.as_deref().unwrap_or("?"))
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown generator {0:?}; expected one of cylinder, helicoid, singularity2d")]
    UnknownGenerator(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Splat(#[from] SplatError),
    #[error(transparent)]
    Hex(#[from] HexError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A stage error with the stage it came from.
#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: StageError,
}

impl PipelineError {
    /// 1 for usage errors, 3 for solver failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match &self.source {
            StageError::Config(_) | StageError::UnknownGenerator(_) => 1,
            StageError::Select(SelectError::SolverFailure(_) | SelectError::TooManyFreeVariables { .. }) => 3,
            _ => 2,
        }
    }
}

/// Attach a stage to a stage result.
pub trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: Into<StageError>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError {
            stage,
            source: e.into(),
        })
    }
}

pub fn load_or_generate(source: &FieldSource, thresholds: Thresholds) -> Result<FrameGrid, StageError> {
    match source {
        FieldSource::File { path } => load_field_with(path, thresholds).map_err(|e| match e {
            FieldError::Io(io) => StageError::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
            other => other.into(),
        }),
        FieldSource::Generator(spec) => spec.generate(thresholds),
    }
}

/// Rotation-energy spikes dilated by `2r`.
pub fn singular_mask(g: &FrameGrid, cfg: &PipelineConfig) -> SingularMask {
    let params = DetectParams {
        k_sigma: cfg.k_sigma,
        ..DetectParams::for_radius(cfg.r)
    };
    detect_singular_voxels(g, &rotation_energy(g), &params)
}

/// Candidate count: the override, or `n_S` for the field's bounding box.
pub fn candidate_count(g: &FrameGrid, cfg: &PipelineConfig) -> Result<usize, StageError> {
    if let Some(n) = cfg.n_surfaces {
        return Ok(n);
    }
    let ext = g.spec().extent();
    let dims: Vec<f64> = (0..3).map(|a| ext[a]).filter(|&e| e > 0.0).collect();
    if dims.len() < 2 {
        return Err(StageError::Config("field must extend along at least two axes".into()));
    }
    Ok(cardinalities(&dims, cfg.gamma, cfg.epsilon)?.1 as usize)
}

pub fn trace_candidates(g: &FrameGrid, mask: &SingularMask, cfg: &PipelineConfig) -> Result<Vec<StreamSurface>, StageError> {
    let n = candidate_count(g, cfg)?;
    Ok(generate_surface_set(g, mask, n, cfg.rng_seed, &cfg.trace_params(), &SeedParams::default())?)
}

/// Stream offset keeping super-sampling draws apart from tracing draws.
const SUPERSAMPLE_STREAM: u64 = 1 << 32;

/// Refine every surface to `r_fine`. Surface `id` always uses the same random
/// stream, so the result does not depend on which other surfaces are present.
pub fn supersample_all(
    g: &FrameGrid,
    mask: &SingularMask,
    surfaces: &[StreamSurface],
    cfg: &PipelineConfig,
) -> Vec<StreamSurface> {
    let params = TraceParams::new(cfg.r_fine);
    surfaces
        .par_iter()
        .map(|s| {
            let mut rng = surface_rng(cfg.rng_seed, SUPERSAMPLE_STREAM + s.id as u64);
            supersample_surface(g, mask, s, cfg.r_fine, &params, &mut rng)
        })
        .collect()
}

/// Splat, union, fill solid voxels and extract the iso-surface. Thickness
/// comes from the field, clamped to `[one output voxel, gamma]`.
pub fn splat_stage(
    g: &FrameGrid,
    surfaces: &[StreamSurface],
    cfg: &PipelineConfig,
) -> Result<(VoxelVolume, TriMesh), StageError> {
    let spec = VoxelVolume::covering(g, cfg.out_dims)?;
    let taus = surfaces
        .iter()
        .map(|s| surface_thickness(g, s, cfg.gamma, spec.spacing, cfg.gamma.max(spec.spacing)))
        .collect::<Result<Vec<_>, _>>()?;
    let r = surfaces.iter().map(|s| s.r).fold(cfg.r_fine, f64::max);
    let vol = fill_solid_regions(&splat_all(surfaces, &taus, &spec, r)?, g)?;
    let mesh = extract_isosurface(&vol, cfg.iso)?;
    Ok((vol, mesh))
}

pub struct HexOutput {
    pub mesh: HexMesh,
    pub quality: QualityReport,
    /// Points dropped for breaking the separation precondition.
    pub dropped_points: usize,
    /// Twist-continuum vertices left without a cell.
    pub removed_cells: usize,
    pub stc_vertices: usize,
    pub stc_edges: usize,
}

pub fn hexmesh_stage(surfaces: &[StreamSurface], r: f64) -> Result<HexOutput, StageError> {
    let (stc, mesh, dropped_points) = hex_mesh_pruned(surfaces, r)?;
    Ok(HexOutput {
        quality: mesh_quality_report(&mesh),
        dropped_points,
        removed_cells: stc.vertices.len() - mesh.cells.len(),
        stc_vertices: stc.vertices.len(),
        stc_edges: stc.edges.len(),
        mesh,
    })
}

/// Wall-clock seconds per stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub field: f64,
    pub mask: f64,
    pub trace: f64,
    pub select: f64,
    pub supersample: f64,
    pub output: f64,
    pub total: f64,
}

impl Timings {
    pub fn stage_sum(&self) -> f64 {
        self.field + self.mask + self.trace + self.select + self.supersample + self.output
    }

    /// One row per stage, in the order of the pipeline.
    pub fn table(&self) -> String {
        let rows = [
            ("field", self.field),
            ("singular mask", self.mask),
            ("trace", self.trace),
            ("selection", self.select),
            ("super-sampling", self.supersample),
            ("output", self.output),
            ("total", self.total),
        ];
        rows.iter().map(|(k, v)| format!("{k:<16}{v:>10.3} s\n")).collect()
    }
}

/// Run summary. Holds no timings, so it is identical across reruns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub field_hash: String,
    pub field_dims: [usize; 3],
    pub masked_voxels: usize,
    pub candidates: usize,
    pub candidate_points: usize,
    pub selection: SelectionReport,
    pub fine_points: usize,
    pub triangles: Option<usize>,
    pub hex: Option<HexSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HexSummary {
    pub stc_vertices: usize,
    pub stc_edges: usize,
    pub dropped_points: usize,
    pub removed_cells: usize,
    pub diagnostics: usize,
    pub quality: QualityReport,
}

pub struct PipelineOutput {
    pub report: PipelineReport,
    pub timings: Timings,
    pub selected: Vec<StreamSurface>,
    pub hex: Option<HexOutput>,
    pub surface_mesh: Option<TriMesh>,
}

/// File names inside the output directory.
pub mod files {
    pub const CANDIDATES: &str = "candidates";
    pub const SELECTED: &str = "selected";
    pub const SELECTION: &str = "selection.json";
    pub const VOLUME: &str = "volume.vvol";
    pub const SURFACE_MESH: &str = "surface.obj";
    pub const HEX_VTK: &str = "hex.vtk";
    pub const HEX_MEDIT: &str = "hex.mesh";
    pub const QUALITY: &str = "quality.json";
    pub const REPORT: &str = "report.json";
    pub const TIMINGS: &str = "timings.json";
}

fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<(), StageError> {
    let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Run every stage and write all artifacts into `cfg.out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    cfg.validate().at(Stage::Config)?;
    let start = Instant::now();
    let mut t = Timings::default();
    let out = &cfg.out_dir;
    let clock = Instant::now();
    let g = load_or_generate(&cfg.field, cfg.thresholds()).at(Stage::Field)?;
    let hash = field_hash(&g);
    fs::create_dir_all(out).at(Stage::Field)?;
    t.field = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let mask = singular_mask(&g, cfg);
    t.mask = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let candidates = trace_candidates(&g, &mask, cfg).at(Stage::Trace)?;
    let manifest = SurfaceManifest {
        r: cfg.r,
        r_fine: None,
        field_hash: hash.clone(),
        surface_ids: candidates.iter().map(|s| s.id).collect(),
    };
    write_surface_set(out.join(files::CANDIDATES), &candidates, &manifest).at(Stage::Trace)?;
    t.trace = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let selection: Selection = select(&candidates, &g, Some(&mask), &cfg.select_params()).at(Stage::Select)?;
    write_json(out.join(files::SELECTION), &selection.report).at(Stage::Select)?;
    t.select = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let chosen: Vec<StreamSurface> = selection.selected().iter().map(|&i| candidates[i].clone()).collect();
    let selected = supersample_all(&g, &mask, &chosen, cfg);
    let manifest = SurfaceManifest {
        r: cfg.r,
        r_fine: Some(cfg.r_fine),
        field_hash: hash.clone(),
        surface_ids: selected.iter().map(|s| s.id).collect(),
    };
    write_surface_set(out.join(files::SELECTED), &selected, &manifest).at(Stage::Supersample)?;
    t.supersample = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let mut surface_mesh = None;
    if cfg.output.splat() {
        let (vol, mesh) = splat_stage(&g, &selected, cfg).at(Stage::Splat)?;
        vol.write_vvol(out.join(files::VOLUME)).at(Stage::Splat)?;
        mesh.write_obj(out.join(files::SURFACE_MESH)).at(Stage::Splat)?;
        surface_mesh = Some(mesh);
    }
    let mut hex = None;
    if cfg.output.hexmesh() {
        let h = hexmesh_stage(&selected, cfg.r_fine).at(Stage::Hexmesh)?;
        h.mesh.write_vtk(out.join(files::HEX_VTK)).at(Stage::Hexmesh)?;
        h.mesh.write_medit(out.join(files::HEX_MEDIT)).at(Stage::Hexmesh)?;
        h.quality.write_json(out.join(files::QUALITY)).at(Stage::Hexmesh)?;
        hex = Some(h);
    }
    let report = PipelineReport {
        field_hash: hash,
        field_dims: g.dims(),
        masked_voxels: mask.count(),
        candidates: candidates.len(),
        candidate_points: candidates.iter().map(StreamSurface::len).sum(),
        selection: selection.report.clone(),
        fine_points: selected.iter().map(StreamSurface::len).sum(),
        triangles: surface_mesh.as_ref().map(|m| m.triangles.len()),
        hex: hex.as_ref().map(|h| HexSummary {
            stc_vertices: h.stc_vertices,
            stc_edges: h.stc_edges,
            dropped_points: h.dropped_points,
            removed_cells: h.removed_cells,
            diagnostics: h.mesh.diagnostics.len(),
            quality: h.quality.clone(),
        }),
    };
    write_json(out.join(files::REPORT), &report).at(Stage::Hexmesh)?;
    t.output = clock.elapsed().as_secs_f64();
    t.total = start.elapsed().as_secs_f64();
    write_json(out.join(files::TIMINGS), &t).at(Stage::Hexmesh)?;
    Ok(PipelineOutput {
        report,
        timings: t,
        selected,
        hex,
        surface_mesh,
    })
}
