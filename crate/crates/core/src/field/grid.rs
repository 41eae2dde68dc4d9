use serde::{Deserialize, Serialize};

use super::frame::Frame;
use super::FieldError;
use crate::Vec3;

/// Regular voxel lattice: voxel `(i, j, k)` sits at `origin + spacing * (i, j, k)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub origin: [f64; 3],
}

impl GridSpec {
    pub fn new(dims: [usize; 3], spacing: f64, origin: Vec3) -> Self {
        Self {
            dims,
            spacing,
            origin: [origin.x, origin.y, origin.z],
        }
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn origin(&self) -> Vec3 {
        Vec3::new(self.origin[0], self.origin[1], self.origin[2])
    }

    /// Linear index, x fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    #[inline]
    pub fn position(&self, c: [usize; 3]) -> Vec3 {
        self.origin() + Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64) * self.spacing
    }

    /// World position of the last voxel.
    pub fn max_corner(&self) -> Vec3 {
        self.position([
            self.dims[0].saturating_sub(1),
            self.dims[1].saturating_sub(1),
            self.dims[2].saturating_sub(1),
        ])
    }

    /// World-space extent along each axis, `spacing * (n - 1)`.
    pub fn extent(&self) -> Vec3 {
        self.max_corner() - self.origin()
    }

    /// Continuous voxel coordinates of `x`.
    #[inline]
    pub fn to_grid(&self, x: &Vec3) -> Vec3 {
        (x - self.origin()) / self.spacing
    }

    /// `true` if `x` lies inside the box spanned by the voxel centers.
    pub fn contains(&self, x: &Vec3) -> bool {
        let g = self.to_grid(x);
        let tol = 1e-9;
        (0..3).all(|a| g[a] >= -tol && g[a] <= (self.dims[a] as f64 - 1.0) + tol)
    }

    /// Voxel whose center is nearest to `x`, or `None` outside the grid box.
    pub fn nearest_voxel(&self, x: &Vec3) -> Option<[usize; 3]> {
        if !self.contains(x) {
            return None;
        }
        let g = self.to_grid(x);
        let mut c = [0usize; 3];
        for a in 0..3 {
            c[a] = (g[a].round().max(0.0) as usize).min(self.dims[a] - 1);
        }
        Some(c)
    }

    /// Face-adjacent neighbors of a voxel.
    pub fn face_neighbors(&self, c: [usize; 3]) -> impl Iterator<Item = [usize; 3]> + '_ {
        const OFFS: [[i64; 3]; 6] = [
            [-1, 0, 0],
            [1, 0, 0],
            [0, -1, 0],
            [0, 1, 0],
            [0, 0, -1],
            [0, 0, 1],
        ];
        OFFS.iter().filter_map(move |o| {
            let mut n = [0usize; 3];
            for a in 0..3 {
                let v = c[a] as i64 + o[a];
                if v < 0 || v >= self.dims[a] as i64 {
                    return None;
                }
                n[a] = v as usize;
            }
            Some(n)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VoxelClass {
    Void,
    Solid,
    Intermediate,
}

/// Void/solid cut-offs applied to relative layer thicknesses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub eps_void: f64,
    pub eps_solid: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            eps_void: 0.01,
            eps_solid: 0.99,
        }
    }
}

/// Void if every layer is at most `eps_void` thick, Solid if every layer is at
/// least `eps_solid` thick, Intermediate otherwise.
pub fn classify_voxel(t: [f64; 3], eps_void: f64, eps_solid: f64) -> VoxelClass {
    if t.iter().all(|&v| v <= eps_void) {
        VoxelClass::Void
    } else if t.iter().cloned().fold(f64::INFINITY, f64::min) >= eps_solid {
        VoxelClass::Solid
    } else {
        VoxelClass::Intermediate
    }
}

/// Layer `k` may be traced through a voxel iff it has material and the voxel
/// is not already fully solid.
pub fn layer_traceable(t: [f64; 3], k: usize, th: Thresholds) -> bool {
    t[k] > th.eps_void && classify_voxel(t, th.eps_void, th.eps_solid) != VoxelClass::Solid
}

/// Anything that can report a frame at a world position.
pub trait FrameSource: Sync {
    fn frame_at(&self, x: &Vec3) -> Result<Frame, FieldError>;
}

/// Dense voxel grid of frames. Immutable once built.
#[derive(Clone, Debug)]
pub struct FrameGrid {
    spec: GridSpec,
    frames: Vec<Frame>,
    classes: Vec<VoxelClass>,
    degenerate: Vec<bool>,
    thresholds: Thresholds,
}

impl FrameGrid {
    pub fn new(spec: GridSpec, frames: Vec<Frame>) -> Result<Self, FieldError> {
        Self::with_thresholds(spec, frames, Thresholds::default())
    }

    pub fn with_thresholds(
        spec: GridSpec,
        frames: Vec<Frame>,
        thresholds: Thresholds,
    ) -> Result<Self, FieldError> {
        if spec.dims.iter().any(|&d| d == 0) || !(spec.spacing > 0.0) {
            return Err(FieldError::InvalidParam(format!(
                "grid dims {:?} / spacing {} must be positive",
                spec.dims, spec.spacing
            )));
        }
        if frames.len() != spec.len() {
            return Err(FieldError::DimensionMismatch {
                expected: spec.len(),
                found: frames.len(),
            });
        }
        let classes = frames
            .iter()
            .map(|f| classify_voxel(f.t, thresholds.eps_void, thresholds.eps_solid))
            .collect();
        let degenerate = vec![false; frames.len()];
        Ok(Self {
            spec,
            frames,
            classes,
            degenerate,
            thresholds,
        })
    }

    pub(crate) fn with_degenerate(mut self, degenerate: Vec<bool>) -> Self {
        assert_eq!(degenerate.len(), self.frames.len());
        self.degenerate = degenerate;
        self
    }

    /// Re-derive the classification with new thresholds.
    pub fn reclassified(mut self, thresholds: Thresholds) -> Self {
        self.thresholds = thresholds;
        for (c, f) in self.classes.iter_mut().zip(&self.frames) {
            *c = classify_voxel(f.t, thresholds.eps_void, thresholds.eps_solid);
        }
        self
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dims(&self) -> [usize; 3] {
        self.spec.dims
    }

    pub fn spacing(&self) -> f64 {
        self.spec.spacing
    }

    pub fn thresholds(&self) -> Thresholds {
        self.thresholds
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn classes(&self) -> &[VoxelClass] {
        &self.classes
    }

    /// Voxels where a generator could not define a frame (on a singular axis).
    pub fn degenerate(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn frame(&self, c: [usize; 3]) -> &Frame {
        &self.frames[self.spec.index(c[0], c[1], c[2])]
    }

    pub fn class(&self, c: [usize; 3]) -> VoxelClass {
        self.classes[self.spec.index(c[0], c[1], c[2])]
    }

    /// Counts of (void, solid, intermediate) voxels.
    pub fn class_histogram(&self) -> [usize; 3] {
        let mut h = [0; 3];
        for c in &self.classes {
            match c {
                VoxelClass::Void => h[0] += 1,
                VoxelClass::Solid => h[1] += 1,
                VoxelClass::Intermediate => h[2] += 1,
            }
        }
        h
    }

    /// Trilinear frame interpolation.
    ///
    /// The eight corner frames are relabeled against the frame of the voxel
    /// nearest to `x`, blended componentwise with the trilinear weights and
    /// re-orthonormalized. Thicknesses follow the same relabeling. A query
    /// exactly on a voxel center returns that voxel's frame unchanged.
    pub fn sample_frame(&self, x: &Vec3) -> Result<Frame, FieldError> {
        if !self.spec.contains(x) {
            return Err(FieldError::OutOfBounds { x: [x.x, x.y, x.z] });
        }
        let g = self.spec.to_grid(x);
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let n = self.spec.dims[a];
            if n == 1 {
                continue;
            }
            let v = g[a].clamp(0.0, (n - 1) as f64);
            let i0 = (v.floor() as usize).min(n - 2);
            base[a] = i0;
            frac[a] = v - i0 as f64;
        }
        let nearest = self.spec.nearest_voxel(x).expect("checked contains");
        let reference = *self.frame(nearest);

        let mut acc_m = [Vec3::zeros(); 3];
        let mut acc_t = [0.0; 3];
        for corner in 0..8 {
            let mut c = base;
            let mut w = 1.0;
            for a in 0..3 {
                let bit = (corner >> a) & 1;
                if self.spec.dims[a] == 1 {
                    if bit == 1 {
                        w = 0.0;
                    }
                    continue;
                }
                c[a] += bit;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w == 0.0 {
                continue;
            }
            if w == 1.0 {
                return Ok(self.frame(c).matched_to(&reference));
            }
            let matched = self.frame(c).matched_to(&reference);
            for k in 0..3 {
                acc_m[k] += matched.m[k] * w;
                acc_t[k] += matched.t[k] * w;
            }
        }
        Frame::new(acc_m, acc_t)
            .orthonormalized()
            .ok_or(FieldError::Degenerate { x: [x.x, x.y, x.z] })
    }
}

impl FrameSource for FrameGrid {
    fn frame_at(&self, x: &Vec3) -> Result<Frame, FieldError> {
        self.sample_frame(x)
    }
}
