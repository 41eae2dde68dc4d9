use std::collections::VecDeque;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pds::PointIndex;
use super::step::rk4_step;
use super::TraceError;
use crate::field::{closest_frame_vector, layer_traceable, FrameGrid, FrameSource, VoxelClass};
use crate::singularity::SingularMask;
use crate::Vec3;

/// Point-sampled stream surface. `normals[i]` is the frame vector the surface
/// is perpendicular to at `points[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamSurface {
    pub id: u32,
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    /// Sampling radius the points were generated with.
    pub r: f64,
}

impl StreamSurface {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest pairwise distance, `INFINITY` for fewer than two points.
    pub fn min_pair_distance(&self) -> f64 {
        let reach = 2.0 * self.r;
        let idx = PointIndex::from_points(reach, &self.points);
        let mut best = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            idx.for_each_within(p, reach, |j, d| {
                if j as usize != i {
                    best = best.min(d);
                }
            });
        }
        if best.is_finite() {
            return best;
        }
        // sparse set: nothing within 2r, fall back to all pairs
        let pts = &self.points;
        (0..pts.len())
            .flat_map(|i| (i + 1..pts.len()).map(move |j| (pts[i] - pts[j]).norm()))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest angle (radians) between a stored normal and the best-matching
    /// frame vector of `field` at the point.
    pub fn alignment_error<F: FrameSource + ?Sized>(&self, field: &F) -> Result<f64, TraceError> {
        let mut worst: f64 = 0.0;
        for (p, n) in self.points.iter().zip(&self.normals) {
            let f = field.frame_at(p)?;
            let (_, v) = closest_frame_vector(&f, n);
            worst = worst.max(v.dot(n).clamp(-1.0, 1.0).acos());
        }
        Ok(worst)
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        }))
    }
}

/// Tuning of the front propagation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceParams {
    /// Minimum distance between samples.
    pub r: f64,
    /// Annulus candidates generated per front point.
    pub candidates: usize,
    /// Runaway guard on the number of points per surface.
    pub max_points: usize,
    /// Run the smoothing pass after tracing.
    pub smooth: bool,
}

impl TraceParams {
    pub fn new(r: f64) -> Self {
        Self {
            r,
            candidates: 30,
            max_points: 200_000,
            smooth: true,
        }
    }
}

/// Why a candidate point was not added.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rejection {
    /// Closer than `r` to an existing point.
    TooClose,
    /// A neighbor within `3r` projects within `r` onto the tangent plane.
    Spiral,
    /// Inside the singularity mask.
    Masked,
    /// The surface's layer has no material here, or the voxel is solid.
    Untraceable,
    OutOfBounds,
}

/// The surface being grown: positions, normals and their spatial index.
struct Front<'a> {
    points: &'a [Vec3],
    normals: &'a [Vec3],
    index: &'a PointIndex,
}

/// Average of `p_n` and its re-estimates from every existing point within
/// `2r`: each neighbor `q` takes an RK4 step towards `p_n` with step length
/// `|p_n - q|`. Failed re-estimates are skipped.
pub fn refine_point<F: FrameSource + ?Sized>(
    field: &F,
    p_n: &Vec3,
    points: &[Vec3],
    normals: &[Vec3],
    index: &PointIndex,
    r: f64,
) -> Vec3 {
    refine_from(field, p_n, &Front { points, normals, index }, r, None)
}

fn refine_from<F: FrameSource + ?Sized>(
    field: &F,
    p_n: &Vec3,
    front: &Front<'_>,
    r: f64,
    skip: Option<u32>,
) -> Vec3 {
    let mut neighbors = Vec::new();
    front.index.for_each_within(p_n, 2.0 * r, |id, d| {
        if Some(id) != skip && d > 0.0 {
            neighbors.push((id, d));
        }
    });
    // fixed summation order for bitwise reproducibility
    neighbors.sort_unstable_by_key(|&(id, _)| id);
    let mut sum = *p_n;
    let mut count = 1.0;
    for (id, dist) in neighbors {
        let q = front.points[id as usize];
        let dir = (p_n - q) / dist;
        if let Ok(est) = rk4_step(field, &q, &front.normals[id as usize], &dir, dist) {
            sum += est;
            count += 1.0;
        }
    }
    sum / count
}

/// Acceptance test for a refined candidate with its normal.
#[allow(clippy::too_many_arguments)]
pub fn accept_point(
    candidate: &Vec3,
    normal: &Vec3,
    points: &[Vec3],
    index: &PointIndex,
    mask: &SingularMask,
    grid: &FrameGrid,
    r: f64,
) -> Result<(), Rejection> {
    let Some(voxel) = grid.spec().nearest_voxel(candidate) else {
        return Err(Rejection::OutOfBounds);
    };
    if index.any_closer(candidate, r) {
        return Err(Rejection::TooClose);
    }
    let mut spiral = false;
    index.for_each_within(candidate, 3.0 * r, |id, _| {
        let v = points[id as usize] - candidate;
        let in_plane = v - normal * normal.dot(&v);
        spiral |= in_plane.norm() < r;
    });
    if spiral {
        return Err(Rejection::Spiral);
    }
    let vf = grid.frame(voxel);
    if !mask.admits(candidate, normal, vf) {
        return Err(Rejection::Masked);
    }
    let (k, _) = closest_frame_vector(vf, normal);
    if grid.class(voxel) == VoxelClass::Solid || !layer_traceable(vf.t, k, grid.thresholds()) {
        return Err(Rejection::Untraceable);
    }
    Ok(())
}

/// Unit vector perpendicular to `n`, preferring the direction of `hint`.
fn tangent_from(hint: &Vec3, n: &Vec3) -> Vec3 {
    let t = hint - n * n.dot(hint);
    if t.norm() > 1e-9 {
        return t.normalize();
    }
    let axis = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    n.cross(&axis).normalize()
}

/// Growing surface state: points, normals, rotational origins and the index.
struct Growth {
    points: Vec<Vec3>,
    normals: Vec<Vec3>,
    origins: Vec<Vec3>,
    index: PointIndex,
}

impl Growth {
    fn push(&mut self, p: Vec3, n: Vec3, d: Vec3) {
        self.points.push(p);
        self.normals.push(n);
        self.origins.push(d);
        self.index.insert(p);
    }

    /// Poisson-disk front expansion from the queued points at radius `r`.
    fn expand<R: Rng>(
        &mut self,
        grid: &FrameGrid,
        mask: &SingularMask,
        mut queue: VecDeque<usize>,
        r: f64,
        params: &TraceParams,
        rng: &mut R,
    ) {
        while let Some(i) = queue.pop_front() {
            if self.points.len() >= params.max_points {
                break;
            }
            let (p0, n0, d_origin) = (self.points[i], self.normals[i], self.origins[i]);
            let e_origin = n0.cross(&d_origin);
            for _ in 0..params.candidates {
                let dist = rng.gen_range(r..=2.0 * r);
                let phi = rng.gen_range(0.0..TAU);
                if self.points.len() >= params.max_points {
                    continue;
                }
                let d0 = d_origin * phi.cos() + e_origin * phi.sin();
                let Ok(p_n) = rk4_step(grid, &p0, &n0, &d0, dist) else {
                    continue;
                };
                let front = Front {
                    points: &self.points,
                    normals: &self.normals,
                    index: &self.index,
                };
                let p = refine_from(grid, &p_n, &front, r, None);
                let Ok(frame) = grid.sample_frame(&p) else {
                    continue;
                };
                let (_, n) = closest_frame_vector(&frame, &n0);
                if accept_point(&p, &n, &self.points, &self.index, mask, grid, r).is_ok() {
                    let d = tangent_from(&d_origin, &n);
                    self.push(p, n, d);
                    queue.push_back(self.points.len() - 1);
                }
            }
        }
    }
}

/// Grow one stream surface from `seed`, perpendicular to frame vector
/// `layer` at the seed. Smooths the result when `params.smooth` is set.
pub fn trace_surface<R: Rng>(
    grid: &FrameGrid,
    mask: &SingularMask,
    seed: &Vec3,
    layer: usize,
    params: &TraceParams,
    rng: &mut R,
) -> Result<StreamSurface, TraceError> {
    if !(params.r > 0.0) || layer > 2 {
        return Err(TraceError::InvalidParam(format!(
            "r = {}, layer = {layer}",
            params.r
        )));
    }
    let frame = grid.sample_frame(seed)?;
    let normal = frame.m[layer];
    let origin = frame.m[(layer + 1) % 3];
    let mut growth = Growth {
        points: Vec::new(),
        normals: Vec::new(),
        origins: Vec::new(),
        index: PointIndex::for_radius(params.r),
    };
    accept_point(seed, &normal, &[], &growth.index, mask, grid, params.r)
        .map_err(TraceError::SeedRejected)?;
    growth.push(*seed, normal, origin);
    growth.expand(grid, mask, VecDeque::from([0]), params.r, params, rng);
    let surface = StreamSurface {
        id: 0,
        points: growth.points,
        normals: growth.normals,
        r: params.r,
    };
    Ok(if params.smooth {
        smooth_surface(grid, &surface)
    } else {
        surface
    })
}

/// One Jacobi pass re-estimating every point from its neighbors within `2r`,
/// then re-matching normals against the field.
pub fn smooth_surface<F: FrameSource + ?Sized>(field: &F, s: &StreamSurface) -> StreamSurface {
    let index = PointIndex::from_points(2.0 * s.r, &s.points);
    let front = Front {
        points: &s.points,
        normals: &s.normals,
        index: &index,
    };
    let moved: Vec<(Vec3, Vec3)> = (0..s.points.len())
        .into_par_iter()
        .map(|i| {
            let p = refine_from(field, &s.points[i], &front, s.r, Some(i as u32));
            match field.frame_at(&p) {
                Ok(f) => (p, closest_frame_vector(&f, &s.normals[i]).1),
                Err(_) => (s.points[i], s.normals[i]),
            }
        })
        .collect();
    let (points, normals) = moved.into_iter().unzip();
    StreamSurface {
        id: s.id,
        points,
        normals,
        r: s.r,
    }
}

/// Fill a surface to the finer radius `r_fine` by restarting the front from
/// every existing point. Original points are kept. Returns the surface
/// unchanged when `r_fine >= s.r`.
pub fn supersample_surface<R: Rng>(
    grid: &FrameGrid,
    mask: &SingularMask,
    s: &StreamSurface,
    r_fine: f64,
    params: &TraceParams,
    rng: &mut R,
) -> StreamSurface {
    if !(r_fine < s.r) || r_fine <= 0.0 {
        return s.clone();
    }
    let mut growth = Growth {
        points: Vec::with_capacity(s.len() * 8),
        normals: Vec::with_capacity(s.len() * 8),
        origins: Vec::with_capacity(s.len() * 8),
        index: PointIndex::for_radius(r_fine),
    };
    for (p, n) in s.points.iter().zip(&s.normals) {
        let hint = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        growth.push(*p, *n, tangent_from(&hint, n));
    }
    let queue: VecDeque<usize> = (0..s.len()).collect();
    growth.expand(grid, mask, queue, r_fine, params, rng);
    StreamSurface {
        id: s.id,
        points: growth.points,
        normals: growth.normals,
        r: r_fine,
    }
}

/// Per-surface generator: stream `i` of a ChaCha8 generator seeded with `seed`.
pub fn surface_rng(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

/// Seeding policy for [`generate_surface_set`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedParams {
    /// Restrict seeds to one frame vector index; random otherwise.
    pub layer: Option<usize>,
    /// Re-draws per surface when a seed is rejected.
    pub attempts: usize,
}

impl Default for SeedParams {
    fn default() -> Self {
        Self {
            layer: None,
            attempts: 64,
        }
    }
}

/// Trace `n_s` surfaces from uniformly drawn traceable voxels with uniformly
/// drawn traceable layers. Surface `i` uses its own random stream, so the
/// output is identical for a given `rng_seed` regardless of thread count.
pub fn generate_surface_set(
    grid: &FrameGrid,
    mask: &SingularMask,
    n_s: usize,
    rng_seed: u64,
    params: &TraceParams,
    seeding: &SeedParams,
) -> Result<Vec<StreamSurface>, TraceError> {
    if n_s == 0 {
        return Err(TraceError::InvalidParam("n_S must be at least 1".into()));
    }
    let th = grid.thresholds();
    let spec = grid.spec();
    let layers_at = |idx: usize| -> Vec<usize> {
        let f = &grid.frames()[idx];
        (0..3)
            .filter(|&k| seeding.layer.map_or(true, |l| l == k))
            .filter(|&k| layer_traceable(f.t, k, th))
            .collect()
    };
    let seeds: Vec<usize> = (0..spec.len())
        .filter(|&i| !mask.excluded()[i] && !layers_at(i).is_empty())
        .collect();
    if seeds.is_empty() {
        return Err(TraceError::InsufficientDomain);
    }
    (0..n_s)
        .into_par_iter()
        .map(|i| {
            let mut rng = surface_rng(rng_seed, i as u64);
            let mut last = Rejection::TooClose;
            for _ in 0..seeding.attempts.max(1) {
                let voxel = seeds[rng.gen_range(0..seeds.len())];
                let layers = layers_at(voxel);
                let layer = layers[rng.gen_range(0..layers.len())];
                let seed = spec.position(spec.coords(voxel));
                match trace_surface(grid, mask, &seed, layer, params, &mut rng) {
                    Ok(mut s) => {
                        s.id = i as u32;
                        return Ok(s);
                    }
                    Err(TraceError::SeedRejected(why)) => last = why,
                    Err(e) => return Err(e),
                }
            }
            Err(TraceError::SeedRejected(last))
        })
        .collect()
}
