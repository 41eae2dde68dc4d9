//! Closed-form frame fields and their voxelizations.
//!
//! Each field is available both as an analytic [`FrameSource`] (exact frames
//! at any point) and as a sampled [`FrameGrid`]. Grid voxels closer than one
//! voxel spacing to a singular axis get the frame of the nearest regular voxel
//! and are flagged in [`FrameGrid::degenerate`].

use serde::{Deserialize, Serialize};

use super::frame::Frame;
use super::grid::{FrameGrid, FrameSource, GridSpec};
use super::FieldError;
use crate::Vec3;

/// Grid parameters shared by all generators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub dims: [usize; 3],
    pub spacing: f64,
    /// Relative thickness assigned to every layer.
    pub thickness: [f64; 3],
}

impl GeneratorParams {
    pub fn new(dims: [usize; 3], spacing: f64) -> Self {
        Self {
            dims,
            spacing,
            thickness: [0.5; 3],
        }
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec::new(self.dims, self.spacing, Vec3::zeros())
    }

    /// World position of the grid center.
    pub fn center(&self) -> Vec3 {
        self.spec().max_corner() * 0.5
    }

    fn validate(&self) -> Result<(), FieldError> {
        if self.dims.iter().any(|&d| d == 0) || !(self.spacing > 0.0) {
            return Err(FieldError::InvalidParam(format!(
                "dims {:?} and spacing {} must be positive",
                self.dims, self.spacing
            )));
        }
        if self.thickness.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(FieldError::InvalidParam(format!(
                "thickness {:?} outside [0, 1]",
                self.thickness
            )));
        }
        Ok(())
    }
}

/// Cylindrical coordinates of `x` about the line through `center` along `axis`.
/// Returns (distance from the axis, radial unit vector or zero).
fn radial(center: &Vec3, axis: &Vec3, x: &Vec3) -> (f64, Vec3) {
    let rel = x - center;
    let perp = rel - axis * axis.dot(&rel);
    let rho = perp.norm();
    if rho > 0.0 {
        (rho, perp / rho)
    } else {
        (0.0, Vec3::zeros())
    }
}

/// Frame field of a cylinder: `m[0]` is the axis, `m[1]` points away from
/// the axis and `m[2] = m[0] x m[1]` runs around it. Singular on the axis.
#[derive(Clone, Copy, Debug)]
pub struct CylinderField {
    pub center: Vec3,
    pub axis: Vec3,
    pub thickness: [f64; 3],
}

impl CylinderField {
    pub fn new(center: Vec3, axis: Vec3, thickness: [f64; 3]) -> Self {
        Self {
            center,
            axis: axis.normalize(),
            thickness,
        }
    }
}

impl FrameSource for CylinderField {
    fn frame_at(&self, x: &Vec3) -> Result<Frame, FieldError> {
        let (rho, er) = radial(&self.center, &self.axis, x);
        if rho < 1e-12 {
            return Err(FieldError::Degenerate { x: [x.x, x.y, x.z] });
        }
        let m0 = self.axis;
        Ok(Frame::new([m0, er, m0.cross(&er)], self.thickness))
    }
}

/// Non-integrable spiraling field about an axis.
///
/// At distance `rho` from the axis the helix direction
/// `m[0] = cos(a) e_theta + sin(a) axis` climbs at angle
/// `a = atan(pitch * rho)` above the plane normal to the axis. `m[1]` is the
/// radial direction and `m[2] = m[0] x m[1]`.
#[derive(Clone, Copy, Debug)]
pub struct HelicoidField {
    pub center: Vec3,
    pub axis: Vec3,
    pub pitch: f64,
    pub thickness: [f64; 3],
}

impl HelicoidField {
    pub fn new(center: Vec3, axis: Vec3, pitch: f64, thickness: [f64; 3]) -> Self {
        Self {
            center,
            axis: axis.normalize(),
            pitch,
            thickness,
        }
    }

    /// Climb angle of the helix direction at distance `rho` from the axis.
    pub fn helix_angle(&self, rho: f64) -> f64 {
        (self.pitch * rho).atan()
    }
}

impl FrameSource for HelicoidField {
    fn frame_at(&self, x: &Vec3) -> Result<Frame, FieldError> {
        let (rho, er) = radial(&self.center, &self.axis, x);
        if rho < 1e-12 {
            return Err(FieldError::Degenerate { x: [x.x, x.y, x.z] });
        }
        let etheta = self.axis.cross(&er);
        let (s, c) = self.helix_angle(rho).sin_cos();
        let m0 = etheta * c + self.axis * s;
        Ok(Frame::new([m0, er, m0.cross(&er)], self.thickness))
    }
}

/// Planar singularity of index `index` in the x-y plane, embedded in a layer
/// whose normal is the constant z direction (`m[2]`).
#[derive(Clone, Copy, Debug)]
pub struct EmbeddedSingularityField {
    pub center: Vec3,
    pub index: i32,
    pub thickness: [f64; 3],
}

impl FrameSource for EmbeddedSingularityField {
    fn frame_at(&self, x: &Vec3) -> Result<Frame, FieldError> {
        let dx = x.x - self.center.x;
        let dy = x.y - self.center.y;
        if dx.hypot(dy) < 1e-12 {
            return Err(FieldError::Degenerate { x: [x.x, x.y, x.z] });
        }
        let theta = dy.atan2(dx) * self.index as f64;
        let (s, c) = theta.sin_cos();
        Ok(Frame::new(
            [Vec3::new(c, s, 0.0), Vec3::new(-s, c, 0.0), Vec3::z()],
            self.thickness,
        ))
    }
}

/// Sample an analytic field at every voxel center. Voxels within one spacing
/// of `singular_axis` (a point and a direction) copy the frame of the nearest
/// regular voxel and are flagged degenerate.
fn voxelize<F: FrameSource>(
    field: &F,
    spec: GridSpec,
    singular_axis: (Vec3, Vec3),
) -> Result<FrameGrid, FieldError> {
    let n = spec.len();
    let mut frames = Vec::with_capacity(n);
    let mut degenerate = vec![false; n];
    let (c, a) = singular_axis;
    for idx in 0..n {
        let x = spec.position(spec.coords(idx));
        let (rho, _) = radial(&c, &a, &x);
        if rho < spec.spacing {
            degenerate[idx] = true;
            frames.push(Frame::axes([0.0; 3]));
        } else {
            frames.push(field.frame_at(&x)?);
        }
    }
    if degenerate.iter().all(|&d| d) {
        return Err(FieldError::InvalidParam(
            "grid too small: every voxel lies on the singular axis".into(),
        ));
    }
    // nearest regular voxel by Euclidean distance, lowest index on ties
    for idx in 0..n {
        if !degenerate[idx] {
            continue;
        }
        let c = spec.coords(idx);
        let mut best: Option<(f64, usize)> = None;
        let mut reach = 2usize;
        while best.is_none() {
            let lo = |a: usize| c[a].saturating_sub(reach);
            let hi = |a: usize| (c[a] + reach).min(spec.dims[a] - 1);
            for k in lo(2)..=hi(2) {
                for j in lo(1)..=hi(1) {
                    for i in lo(0)..=hi(0) {
                        let jdx = spec.index(i, j, k);
                        if degenerate[jdx] {
                            continue;
                        }
                        let d = (spec.position([i, j, k]) - spec.position(c)).norm_squared();
                        if best.map_or(true, |(bd, bj)| d < bd || (d == bd && jdx < bj)) {
                            best = Some((d, jdx));
                        }
                    }
                }
            }
            reach *= 2;
        }
        frames[idx] = frames[best.unwrap().1];
    }
    Ok(FrameGrid::new(spec, frames)?.with_degenerate(degenerate))
}

/// Cylinder field on a grid, axis through the grid center.
pub fn gen_cylinder_field(params: &GeneratorParams, axis: Vec3) -> Result<FrameGrid, FieldError> {
    params.validate()?;
    if axis.norm() < 1e-12 {
        return Err(FieldError::InvalidParam("zero axis".into()));
    }
    let field = CylinderField::new(params.center(), axis, params.thickness);
    voxelize(&field, params.spec(), (field.center, field.axis))
}

/// Helicoid field on a grid, axis through the grid center.
pub fn gen_helicoid_field(
    params: &GeneratorParams,
    pitch: f64,
    axis: Vec3,
) -> Result<FrameGrid, FieldError> {
    params.validate()?;
    if pitch == 0.0 || !pitch.is_finite() {
        return Err(FieldError::InvalidParam("pitch must be finite and nonzero".into()));
    }
    if axis.norm() < 1e-12 {
        return Err(FieldError::InvalidParam("zero axis".into()));
    }
    let field = HelicoidField::new(params.center(), axis, pitch, params.thickness);
    voxelize(&field, params.spec(), (field.center, field.axis))
}

/// Index +-1 planar singularity through the grid center, constant z layer.
pub fn gen_embedded_singularity_field(
    params: &GeneratorParams,
    index: i32,
) -> Result<FrameGrid, FieldError> {
    params.validate()?;
    if index != 1 && index != -1 {
        return Err(FieldError::InvalidParam(format!("index must be +-1, got {index}")));
    }
    let field = EmbeddedSingularityField {
        center: params.center(),
        index,
        thickness: params.thickness,
    };
    voxelize(&field, params.spec(), (field.center, Vec3::z()))
}
