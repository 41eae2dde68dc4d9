//! Turning surfaces into a voxel solid.
//!
//! Each surface point carries a cylinder of radius `r` and half-height `tau`.
//! Inside it the point contributes a smoothstep profile across the surface,
//! weighted by a smoothstep falloff along it; weights go to a separate grid and
//! normalize the profile sum. Surfaces combine by voxel-wise maximum.

mod iso;

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::field::io::GridHeader;
use crate::field::{closest_frame_vector, FieldError, FrameGrid, GridSpec, VoxelClass};
use crate::tracer::StreamSurface;
use crate::Vec3;

pub use iso::{extract_isosurface, TriMesh};

#[derive(Debug, Error)]
pub enum SplatError {
    #[error("smoothstep range [{a}, {b}] is empty")]
    InvalidRange { a: f64, b: f64 },
    #[error("volume grids differ")]
    GridMismatch,
    #[error("volume never crosses the iso value")]
    EmptySurface,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Cubic Hermite step from 0 at `a` to 1 at `b`.
pub fn smoothstep(a: f64, b: f64, x: f64) -> Result<f64, SplatError> {
    if !(a < b) {
        return Err(SplatError::InvalidRange { a, b });
    }
    Ok(ss(a, b, x))
}

#[inline]
fn ss(a: f64, b: f64, x: f64) -> f64 {
    let t = ((x - a) / (b - a)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Scalar occupancy in `[0, 1]` on a regular grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelVolume {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl VoxelVolume {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            values: vec![0.0; spec.len()],
            spec,
        }
    }

    pub fn get(&self, c: [usize; 3]) -> f64 {
        self.values[self.spec.index(c[0], c[1], c[2])]
    }

    /// Output grid covering `g` with `dims` samples per axis. The spacing is
    /// set by the longest axis so voxels stay cubic.
    pub fn covering(g: &FrameGrid, longest: usize) -> Result<GridSpec, SplatError> {
        if longest < 2 {
            return Err(SplatError::InvalidParam(format!("output resolution {longest}")));
        }
        let ext = g.spec().extent();
        let h = ext.max() / (longest - 1) as f64;
        let dims = [0, 1, 2].map(|a| ((ext[a] / h + 1e-9).floor() as usize + 1).max(1));
        Ok(GridSpec::new(dims, h, g.spec().origin()))
    }

    /// JSON header line then little-endian `f32` values, x fastest.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(128 + 4 * self.values.len());
        GridHeader::from_spec(&self.spec)
            .write_line(&mut out)
            .expect("writing to a Vec cannot fail");
        for v in &self.values {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    pub fn write_vvol(&self, path: impl AsRef<Path>) -> Result<(), SplatError> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        f.write_all(&self.to_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn read_vvol(path: impl AsRef<Path>) -> Result<Self, SplatError> {
        let bytes = fs::read(path)?;
        let (header, rest) = GridHeader::read_line(&bytes[..])?;
        let spec = header.spec();
        if rest.len() != 4 * spec.len() {
            return Err(FieldError::DimensionMismatch {
                expected: spec.len(),
                found: rest.len() / 4,
            }
            .into());
        }
        let values = rest
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Ok(Self { spec, values })
    }
}

/// Relative thickness of the layer the surface follows at `point`, scaled by
/// the member spacing `gamma`.
pub fn thickness_from_field(
    g: &FrameGrid,
    point: &Vec3,
    normal: &Vec3,
    gamma: f64,
) -> Result<f64, SplatError> {
    let f = g.sample_frame(point)?;
    let (k, _) = closest_frame_vector(&f, normal);
    Ok(f.t[k] * gamma)
}

/// Per-point thickness from the field, clamped to `[lo, hi]`.
pub fn surface_thickness(
    g: &FrameGrid,
    s: &StreamSurface,
    gamma: f64,
    lo: f64,
    hi: f64,
) -> Result<Vec<f64>, SplatError> {
    s.points
        .iter()
        .zip(&s.normals)
        .map(|(p, n)| thickness_from_field(g, p, n, gamma).map(|t| t.clamp(lo, hi)))
        .collect()
}

/// Per-z-slice lists of point indices whose support reaches the slice.
fn bin_by_slice(s: &StreamSurface, tau: &[f64], spec: &GridSpec, r: f64) -> Vec<Vec<u32>> {
    let nz = spec.dims[2];
    let mut bins = vec![Vec::new(); nz];
    for (i, (p, n)) in s.points.iter().zip(&s.normals).enumerate() {
        let half = support_half_extent(n, r, tau[i]);
        let lo = ((p.z - half.z - spec.origin[2]) / spec.spacing).ceil().max(0.0);
        let hi = ((p.z + half.z - spec.origin[2]) / spec.spacing).floor();
        if hi < 0.0 || lo > (nz - 1) as f64 {
            continue;
        }
        for k in lo as usize..=(hi as usize).min(nz - 1) {
            bins[k].push(i as u32);
        }
    }
    bins
}

/// Half extent of the axis-aligned box around a cylinder of radius `r` and
/// half-height `tau` with axis `n`.
fn support_half_extent(n: &Vec3, r: f64, tau: f64) -> Vec3 {
    Vec3::from_fn(|a, _| tau * n[a].abs() + r * (1.0 - n[a] * n[a]).max(0.0).sqrt())
}

/// Splat one z-slice of a surface. Points are composited in index order, so
/// the result does not depend on how slices are scheduled.
fn splat_slice(
    s: &StreamSurface,
    tau: &[f64],
    spec: &GridSpec,
    r: f64,
    k: usize,
    points: &[u32],
    num: &mut [f64],
    den: &mut [f64],
) {
    let [nx, ny, _] = spec.dims;
    let h = spec.spacing;
    let o = spec.origin();
    let z = o.z + k as f64 * h;
    num.iter_mut().for_each(|v| *v = 0.0);
    den.iter_mut().for_each(|v| *v = 0.0);
    for &i in points {
        let i = i as usize;
        let (p, n, t) = (s.points[i], s.normals[i], tau[i]);
        let half = support_half_extent(&n, r, t);
        let range = |a: usize, len: usize| {
            let lo = ((p[a] - half[a] - o[a]) / h).ceil().max(0.0) as usize;
            let hi = ((p[a] + half[a] - o[a]) / h).floor();
            (lo, if hi < 0.0 { None } else { Some((hi as usize).min(len - 1)) })
        };
        let (x0, Some(x1)) = range(0, nx) else { continue };
        let (y0, Some(y1)) = range(1, ny) else { continue };
        for y in y0..=y1 {
            for x in x0..=x1 {
                let v = Vec3::new(o.x + x as f64 * h, o.y + y as f64 * h, z) - p;
                let axial = n.dot(&v);
                if axial.abs() > t {
                    continue;
                }
                let lateral = (v - n * axial).norm();
                if lateral >= r {
                    continue;
                }
                let w = ss(-r, 0.0, -lateral);
                let phi = ss(-t, 0.0, -axial.abs());
                let idx = y * nx + x;
                num[idx] += w * phi;
                den[idx] += w;
            }
        }
    }
}

fn check_inputs(s: &StreamSurface, tau: &[f64], r: f64) -> Result<(), SplatError> {
    if tau.len() != s.points.len() {
        return Err(SplatError::InvalidParam(format!(
            "{} thicknesses for {} points",
            tau.len(),
            s.points.len()
        )));
    }
    if !(r > 0.0) || tau.iter().any(|t| !(*t >= 0.0)) {
        return Err(SplatError::InvalidParam("radius and thicknesses must be positive".into()));
    }
    Ok(())
}

/// Composite one surface into a fresh volume.
pub fn splat_surface(
    s: &StreamSurface,
    tau: &[f64],
    spec: &GridSpec,
    r: f64,
) -> Result<VoxelVolume, SplatError> {
    let mut out = VoxelVolume::zeros(*spec);
    splat_into_max(&mut out, s, tau, r)?;
    Ok(out)
}

/// `V = max(V, V_s)` for the splat `V_s` of one surface.
pub fn splat_into_max(
    vol: &mut VoxelVolume,
    s: &StreamSurface,
    tau: &[f64],
    r: f64,
) -> Result<(), SplatError> {
    check_inputs(s, tau, r)?;
    let spec = vol.spec;
    let bins = bin_by_slice(s, tau, &spec, r);
    let plane = spec.dims[0] * spec.dims[1];
    vol.values
        .par_chunks_mut(plane)
        .zip(bins.par_iter())
        .enumerate()
        .for_each_init(
            || (vec![0.0; plane], vec![0.0; plane]),
            |(num, den), (k, (slice, pts))| {
                if pts.is_empty() {
                    return;
                }
                splat_slice(s, tau, &spec, r, k, pts, num, den);
                for ((v, n), d) in slice.iter_mut().zip(num.iter()).zip(den.iter()) {
                    if *d > 0.0 {
                        *v = v.max(n / d);
                    }
                }
            },
        );
    Ok(())
}

/// Voxel-wise maximum of volumes on one grid.
pub fn union_volumes(vols: &[VoxelVolume]) -> Result<VoxelVolume, SplatError> {
    let first = vols.first().ok_or(SplatError::InvalidParam("no volumes".into()))?;
    if vols.iter().any(|v| v.spec != first.spec) {
        return Err(SplatError::GridMismatch);
    }
    let mut out = first.clone();
    for v in &vols[1..] {
        out.values.iter_mut().zip(&v.values).for_each(|(a, b)| *a = a.max(*b));
    }
    Ok(out)
}

/// Splat every surface and take the union.
pub fn splat_all(
    surfaces: &[StreamSurface],
    taus: &[Vec<f64>],
    spec: &GridSpec,
    r: f64,
) -> Result<VoxelVolume, SplatError> {
    let mut vol = VoxelVolume::zeros(*spec);
    for (s, tau) in surfaces.iter().zip(taus) {
        splat_into_max(&mut vol, s, tau, r)?;
    }
    Ok(vol)
}

/// Set voxels whose field voxel is Solid to 1. The volume must lie inside the
/// field's domain.
pub fn fill_solid_regions(v: &VoxelVolume, g: &FrameGrid) -> Result<VoxelVolume, SplatError> {
    let field = g.spec();
    if !field.contains(&v.spec.origin()) || !field.contains(&v.spec.max_corner()) {
        return Err(SplatError::GridMismatch);
    }
    let mut out = v.clone();
    for (i, val) in out.values.iter_mut().enumerate() {
        let x = v.spec.position(v.spec.coords(i));
        let c = field.nearest_voxel(&x).ok_or(SplatError::GridMismatch)?;
        if g.class(c) == VoxelClass::Solid {
            *val = 1.0;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
