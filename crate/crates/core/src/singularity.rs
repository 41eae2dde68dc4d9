//! Singular-curve detection by rotation energy, and the exclusion mask that
//! keeps stream surfaces away from singular curves.

use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;

use crate::field::io::GridHeader;
use crate::field::{relative_rotation_angle, FieldError, Frame, FrameGrid, GridSpec, VoxelClass};
use crate::Vec3;

/// Largest angle between a surface normal and the frame vector along the
/// singular curve for which the traversal exception applies.
pub const TRAVERSAL_TOLERANCE_DEG: f64 = 5.0;

/// Per-voxel scalar values on a grid (radians for rotation energy).
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

/// Average over existing face neighbors of the smallest rotation aligning the
/// voxel frame with the neighbor frame.
pub fn rotation_energy(g: &FrameGrid) -> ScalarField {
    let spec = *g.spec();
    let values = (0..spec.len())
        .into_par_iter()
        .map(|idx| {
            let c = spec.coords(idx);
            let f = g.frame(c);
            let mut sum = 0.0;
            let mut count = 0usize;
            for n in spec.face_neighbors(c) {
                sum += relative_rotation_angle(f, g.frame(n));
                count += 1;
            }
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        })
        .collect();
    ScalarField { spec, values }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectParams {
    /// Spike threshold in standard deviations above the mean.
    pub k_sigma: f64,
    /// Dilation radius in world units.
    pub dilation_radius: f64,
    /// Let layers whose normal runs along the singular curve pass through.
    pub allow_traversal: bool,
}

impl DetectParams {
    /// Defaults for a given sampling radius `r`: three sigma, dilation `2r`.
    pub fn for_radius(r: f64) -> Self {
        Self {
            k_sigma: 3.0,
            dilation_radius: 2.0 * r,
            allow_traversal: false,
        }
    }
}

/// Voxels that stream surfaces may not enter.
#[derive(Clone, Debug)]
pub struct SingularMask {
    spec: GridSpec,
    excluded: Vec<bool>,
    core: Vec<bool>,
    /// Unit tangent of the singular curve near each excluded voxel, present
    /// only when traversal is enabled.
    tangents: Option<Vec<Vec3>>,
    pub dilation_radius: f64,
    pub threshold: f64,
}

impl SingularMask {
    /// Mask with nothing excluded.
    pub fn empty(spec: GridSpec) -> Self {
        Self {
            spec,
            excluded: vec![false; spec.len()],
            core: vec![false; spec.len()],
            tangents: None,
            dilation_radius: 0.0,
            threshold: f64::INFINITY,
        }
    }

    /// Mask from an explicit exclusion list; every entry counts as core.
    pub fn from_excluded(spec: GridSpec, excluded: Vec<bool>) -> Self {
        assert_eq!(excluded.len(), spec.len(), "mask length must match the grid");
        Self {
            spec,
            core: excluded.clone(),
            excluded,
            tangents: None,
            dilation_radius: 0.0,
            threshold: f64::NAN,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn excluded(&self) -> &[bool] {
        &self.excluded
    }

    /// Voxels marked before dilation.
    pub fn core(&self) -> &[bool] {
        &self.core
    }

    pub fn count(&self) -> usize {
        self.excluded.iter().filter(|&&e| e).count()
    }

    pub fn is_excluded(&self, c: [usize; 3]) -> bool {
        self.excluded[self.spec.index(c[0], c[1], c[2])]
    }

    /// `true` if a surface point at `x` with `normal` may be placed there.
    pub fn admits(&self, x: &Vec3, normal: &Vec3, frame: &Frame) -> bool {
        let Some(c) = self.spec.nearest_voxel(x) else {
            return false;
        };
        let idx = self.spec.index(c[0], c[1], c[2]);
        if !self.excluded[idx] {
            return true;
        }
        let Some(tangents) = &self.tangents else {
            return false;
        };
        let (_, along) = frame.closest_vector(&tangents[idx]);
        let cos = normal.dot(&along).abs();
        cos >= TRAVERSAL_TOLERANCE_DEG.to_radians().cos()
    }

    /// Raw `u8` dump with the `.ffield` header line.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), FieldError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        GridHeader::from_spec(&self.spec).write_line(&mut f)?;
        let bytes: Vec<u8> = self.excluded.iter().map(|&e| e as u8).collect();
        f.write_all(&bytes)?;
        f.flush()?;
        Ok(())
    }
}

/// Mark voxels whose energy exceeds `mean + k_sigma * std` of the
/// Intermediate voxels, add generator-flagged degenerate voxels, then dilate.
pub fn detect_singular_voxels(
    g: &FrameGrid,
    energy: &ScalarField,
    params: &DetectParams,
) -> SingularMask {
    let spec = *g.spec();
    let (mut n, mut sum, mut sum_sq) = (0usize, 0.0, 0.0);
    for (e, c) in energy.values.iter().zip(g.classes()) {
        if *c == VoxelClass::Intermediate {
            n += 1;
            sum += e;
            sum_sq += e * e;
        }
    }
    let threshold = if n == 0 || params.k_sigma.is_infinite() {
        f64::INFINITY
    } else {
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean * mean).max(0.0);
        mean + params.k_sigma * var.sqrt()
    };
    let core: Vec<bool> = energy
        .values
        .iter()
        .zip(g.degenerate())
        .map(|(&e, &d)| e > threshold || d)
        .collect();
    let (excluded, nearest_core) = dilate(&spec, &core, params.dilation_radius);
    let tangents = params
        .allow_traversal
        .then(|| curve_tangents(&spec, &core, &excluded, &nearest_core, params.dilation_radius));
    SingularMask {
        spec,
        excluded,
        core,
        tangents,
        dilation_radius: params.dilation_radius,
        threshold,
    }
}

/// Dilate `core` by a ball of `radius` world units. Also returns, for each
/// excluded voxel, the nearest core voxel.
fn dilate(spec: &GridSpec, core: &[bool], radius: f64) -> (Vec<bool>, Vec<usize>) {
    let mut excluded = core.to_vec();
    let mut nearest: Vec<usize> = (0..core.len()).collect();
    let mut best_d = vec![f64::INFINITY; core.len()];
    let reach = (radius / spec.spacing).floor().max(0.0) as i64;
    let r2 = (radius / spec.spacing).powi(2);
    let mut offsets = Vec::new();
    for dz in -reach..=reach {
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let d2 = (dx * dx + dy * dy + dz * dz) as f64;
                if d2 <= r2 + 1e-9 {
                    offsets.push(([dx, dy, dz], d2));
                }
            }
        }
    }
    for idx in (0..core.len()).filter(|&i| core[i]) {
        let c = spec.coords(idx);
        for (o, d2) in &offsets {
            let mut n = [0usize; 3];
            let mut inside = true;
            for a in 0..3 {
                let v = c[a] as i64 + o[a];
                if v < 0 || v >= spec.dims[a] as i64 {
                    inside = false;
                    break;
                }
                n[a] = v as usize;
            }
            if !inside {
                continue;
            }
            let j = spec.index(n[0], n[1], n[2]);
            excluded[j] = true;
            if *d2 < best_d[j] {
                best_d[j] = *d2;
                nearest[j] = idx;
            }
        }
    }
    (excluded, nearest)
}

/// Principal direction of the core voxels around each excluded voxel.
fn curve_tangents(
    spec: &GridSpec,
    core: &[bool],
    excluded: &[bool],
    nearest_core: &[usize],
    radius: f64,
) -> Vec<Vec3> {
    let window = ((radius / spec.spacing).ceil() as i64).max(2);
    let core_tangent = |idx: usize| -> Vec3 {
        let c = spec.coords(idx);
        let mut pts = Vec::new();
        for dz in -window..=window {
            for dy in -window..=window {
                for dx in -window..=window {
                    let n = [c[0] as i64 + dx, c[1] as i64 + dy, c[2] as i64 + dz];
                    if (0..3).any(|a| n[a] < 0 || n[a] >= spec.dims[a] as i64) {
                        continue;
                    }
                    let j = spec.index(n[0] as usize, n[1] as usize, n[2] as usize);
                    if core[j] {
                        pts.push(Vec3::new(n[0] as f64, n[1] as f64, n[2] as f64));
                    }
                }
            }
        }
        let mean = pts.iter().fold(Vec3::zeros(), |a, p| a + p) / pts.len() as f64;
        let cov = pts
            .iter()
            .fold(Matrix3::zeros(), |a, p| a + (p - mean) * (p - mean).transpose());
        let eig = SymmetricEigen::new(cov);
        let i = eig.eigenvalues.imax();
        eig.eigenvectors.column(i).into_owned()
    };
    (0..excluded.len())
        .map(|idx| {
            if excluded[idx] {
                core_tangent(nearest_core[idx])
            } else {
                Vec3::zeros()
            }
        })
        .collect()
}
