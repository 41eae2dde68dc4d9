//! Synthetic inputs: constant fields and lattice-sampled planes.
//!
//! Used by the tests and examples, and handy for checking a build against
//! configurations with known answers.

use rand::Rng;

use crate::field::{Frame, FrameGrid, GridSpec};
use crate::tracer::StreamSurface;
use crate::Vec3;

/// Axis-aligned frames with thickness `t` everywhere.
pub fn constant_field(dims: [usize; 3], spacing: f64, t: [f64; 3]) -> FrameGrid {
    let spec = GridSpec::new(dims, spacing, Vec3::zeros());
    FrameGrid::new(spec, vec![Frame::axes(t); spec.len()]).expect("constant field is valid")
}

/// Plane `x[axis] = offset` sampled on a square lattice of step `h` over
/// `lo..=hi` in the two remaining coordinates.
pub fn axis_plane(id: u32, axis: usize, offset: f64, lo: Vec3, hi: Vec3, h: f64) -> StreamSurface {
    let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
    let na = ((hi[a] - lo[a]) / h + 1e-9).floor() as usize;
    let nb = ((hi[b] - lo[b]) / h + 1e-9).floor() as usize;
    let mut points = Vec::with_capacity((na + 1) * (nb + 1));
    for j in 0..=nb {
        for i in 0..=na {
            let mut p = Vec3::zeros();
            p[axis] = offset;
            p[a] = lo[a] + i as f64 * h;
            p[b] = lo[b] + j as f64 * h;
            points.push(p);
        }
    }
    let mut n = Vec3::zeros();
    n[axis] = 1.0;
    StreamSurface {
        id,
        normals: vec![n; points.len()],
        points,
        r: h,
    }
}

/// `count` planes with random axis (among `axes`) and random offset, spanning
/// the whole grid.
pub fn random_planes<R: Rng>(
    g: &FrameGrid,
    count: usize,
    axes: &[usize],
    h: f64,
    rng: &mut R,
) -> Vec<StreamSurface> {
    let lo = g.spec().origin();
    let hi = g.spec().max_corner();
    (0..count)
        .map(|i| {
            let axis = axes[rng.gen_range(0..axes.len())];
            let offset = rng.gen_range(lo[axis]..=hi[axis]);
            axis_plane(i as u32, axis, offset, lo, hi, h)
        })
        .collect()
}

/// `k + 1` planes per axis at spacing `l`, the first at `origin`. Planes
/// overhang the outermost ones by `l / 2`, so every triple point sees a
/// symmetric neighbourhood. Ids run axis by axis.
pub fn plane_stack(k: usize, l: f64, h: f64, origin: Vec3) -> Vec<StreamSurface> {
    let lo = origin - Vec3::repeat(0.5 * l);
    let hi = origin + Vec3::repeat((k as f64 + 0.5) * l);
    let mut out = Vec::with_capacity(3 * (k + 1));
    for axis in 0..3 {
        for i in 0..=k {
            let offset = origin[axis] + i as f64 * l;
            out.push(axis_plane(out.len() as u32, axis, offset, lo, hi, h));
        }
    }
    out
}

/// Three orthogonal planes through the origin plus a copy of the `z` plane
/// shifted by `l`: two triple points on the `z` axis.
pub fn two_cell_planes(l: f64, h: f64) -> Vec<StreamSurface> {
    let lo = Vec3::repeat(-0.5 * l);
    let hi = Vec3::new(0.5 * l, 0.5 * l, 1.5 * l);
    vec![
        axis_plane(0, 0, 0.0, lo, hi, h),
        axis_plane(1, 1, 0.0, lo, hi, h),
        axis_plane(2, 2, 0.0, lo, hi, h),
        axis_plane(3, 2, l, lo, hi, h),
    ]
}
