//! Choosing an evenly spaced subset of traced surfaces.
//!
//! Probes on a lattice record which surfaces pass within a band around them,
//! split by the local frame vector the surface follows. A good subset covers
//! every (probe, channel) pair exactly once; the L1 deviation from that target
//! is minimized by a linear relaxation followed by exact branch and bound.

mod bnb;
pub mod lp;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{closest_frame_vector, FieldError, FrameGrid, VoxelClass};
use crate::singularity::SingularMask;
use crate::tracer::{PointIndex, StreamSurface};
use crate::Vec3;

pub use bnb::{finalize_binary, SelectionResult};
pub use lp::{solve_l1, L1Problem, LpSolution};

/// Frame vectors per probe.
pub const CHANNELS: usize = 3;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("LP solver failed: {0}")]
    SolverFailure(String),
    #[error("{free} weights left fractional, budget is {budget}; check epsilon and gamma")]
    TooManyFreeVariables { free: usize, budget: usize },
    #[error("no probe lies in the traceable domain")]
    NoProbes,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// `(n_Sopt, n_S, n_p)` for a box with side lengths `dims` (2 or 3 entries).
pub fn cardinalities(dims: &[f64], gamma: f64, eps: f64) -> Result<(u64, u64, u64), SelectError> {
    if !(gamma > 0.0) || !(eps > 0.0 && eps < 1.0) {
        return Err(SelectError::InvalidParam(format!("gamma = {gamma}, epsilon = {eps}")));
    }
    if !(2..=3).contains(&dims.len()) || dims.iter().any(|&d| !(d > 0.0)) {
        return Err(SelectError::InvalidParam(format!("dims {dims:?}")));
    }
    let up = |v: f64| (v - 1e-9).ceil() as u64;
    let s_opt: f64 = dims.iter().map(|d| d / gamma).sum();
    let probes: f64 = dims.iter().map(|d| d / (eps * gamma)).product();
    Ok((up(s_opt), up(s_opt / eps), up(probes)))
}

/// Probe lattice restricted to the traceable domain, with a fixed random
/// labelling of frame vectors to channels at every probe.
#[derive(Clone, Debug)]
pub struct ProbeGrid {
    pub spacing: f64,
    pub positions: Vec<Vec3>,
    /// `labels[p][k]` is the channel of frame vector `k` at probe `p`.
    pub labels: Vec<[u8; CHANNELS]>,
}

impl ProbeGrid {
    /// Lattice with spacing `eps * gamma` anchored at the grid origin. Only
    /// probes whose nearest voxel is Intermediate and unmasked are kept.
    pub fn new(
        g: &FrameGrid,
        mask: Option<&SingularMask>,
        gamma: f64,
        eps: f64,
        rng_seed: u64,
    ) -> Result<Self, SelectError> {
        let spacing = eps * gamma;
        if !(spacing > 0.0) {
            return Err(SelectError::InvalidParam(format!("probe spacing {spacing}")));
        }
        let spec = g.spec();
        let ext = spec.extent();
        let counts: Vec<usize> = (0..3).map(|a| (ext[a] / spacing + 1e-9).floor() as usize + 1).collect();
        let mut positions = Vec::new();
        for k in 0..counts[2] {
            for j in 0..counts[1] {
                for i in 0..counts[0] {
                    let x = spec.origin() + Vec3::new(i as f64, j as f64, k as f64) * spacing;
                    let Some(c) = spec.nearest_voxel(&x) else { continue };
                    if g.class(c) != VoxelClass::Intermediate {
                        continue;
                    }
                    if mask.is_some_and(|m| m.is_excluded(c)) {
                        continue;
                    }
                    positions.push(x);
                }
            }
        }
        if positions.is_empty() {
            return Err(SelectError::NoProbes);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let labels = positions
            .iter()
            .map(|_| {
                let mut l = [0u8, 1, 2];
                l.shuffle(&mut rng);
                l
            })
            .collect();
        Ok(Self {
            spacing,
            positions,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Sparse binary activation matrix. Only rows with at least one active
/// surface are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationMatrix {
    pub n_surfaces: usize,
    pub n_probes: usize,
    /// `(probe, channel, active surfaces ascending)`.
    pub rows: Vec<(u32, u8, Vec<u32>)>,
}

/// Activation rows merged by support. Rows with identical support contribute
/// identical terms, so each unique support carries its multiplicity.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressedRows {
    pub n: usize,
    pub supports: Vec<Vec<u32>>,
    pub counts: Vec<u64>,
    /// Rows no surface touches; each adds 1 to every objective.
    pub empty: u64,
}

impl CompressedRows {
    /// Exact L1 deviation of a binary selection.
    pub fn objective(&self, w: &[bool]) -> u64 {
        let mut total = self.empty;
        for (s, &c) in self.supports.iter().zip(&self.counts) {
            let hits = s.iter().filter(|&&j| w[j as usize]).count() as i64;
            total += c * (hits - 1).unsigned_abs();
        }
        total
    }

    pub fn problem(&self) -> L1Problem {
        L1Problem {
            n: self.n,
            rows: self.supports.clone(),
            cost: self.counts.iter().map(|&c| c as f64).collect(),
            rhs: vec![1.0; self.supports.len()],
        }
    }
}

impl ActivationMatrix {
    pub fn total_rows(&self) -> usize {
        self.n_probes * CHANNELS
    }

    pub fn compress(&self) -> CompressedRows {
        let mut merged: BTreeMap<&[u32], u64> = BTreeMap::new();
        for (_, _, s) in &self.rows {
            *merged.entry(s.as_slice()).or_default() += 1;
        }
        let (supports, counts) = merged.into_iter().map(|(s, c)| (s.to_vec(), c)).unzip();
        CompressedRows {
            n: self.n_surfaces,
            supports,
            counts,
            empty: (self.total_rows() - self.rows.len()) as u64,
        }
    }

    /// Dense 0/1 view, rows in `(probe, channel)` order. For tests and small inputs.
    pub fn dense(&self) -> Vec<Vec<u8>> {
        let mut out = vec![vec![0u8; self.n_surfaces]; self.total_rows()];
        for (p, c, s) in &self.rows {
            for &j in s {
                out[*p as usize * CHANNELS + *c as usize][j as usize] = 1;
            }
        }
        out
    }
}

/// Nearest-point lookup for one surface, skipped by bounding box.
struct SurfaceLookup {
    lo: Vec3,
    hi: Vec3,
    index: PointIndex,
}

/// Mark `A[(x, c), S] = 1` when the point of `S` nearest to probe `x` lies
/// within `band`, with `c` the probe's channel for the frame vector closest to
/// that point's normal.
pub fn compute_activation(
    surfaces: &[StreamSurface],
    probes: &ProbeGrid,
    g: &FrameGrid,
    band: f64,
) -> Result<ActivationMatrix, SelectError> {
    if !(band > 0.0) {
        return Err(SelectError::InvalidParam(format!("band {band}")));
    }
    let lookups: Vec<Option<SurfaceLookup>> = surfaces
        .par_iter()
        .map(|s| {
            let (lo, hi) = s.bounds()?;
            Some(SurfaceLookup {
                lo: lo - Vec3::repeat(band),
                hi: hi + Vec3::repeat(band),
                index: PointIndex::from_points(band, &s.points),
            })
        })
        .collect();
    let per_probe: Vec<Vec<(u8, Vec<u32>)>> = probes
        .positions
        .par_iter()
        .zip(&probes.labels)
        .map(|(x, labels)| -> Result<_, SelectError> {
            let frame = g.sample_frame(x)?;
            let mut by_channel: [Vec<u32>; CHANNELS] = Default::default();
            for (sid, look) in lookups.iter().enumerate() {
                let Some(look) = look else { continue };
                if (0..3).any(|a| x[a] < look.lo[a] || x[a] > look.hi[a]) {
                    continue;
                }
                if let Some((pid, _)) = look.index.nearest_within(x, band) {
                    let n = surfaces[sid].normals[pid as usize];
                    let (k, _) = closest_frame_vector(&frame, &n);
                    by_channel[labels[k] as usize].push(sid as u32);
                }
            }
            Ok(by_channel
                .into_iter()
                .enumerate()
                .filter(|(_, s)| !s.is_empty())
                .map(|(c, s)| (c as u8, s))
                .collect())
        })
        .collect::<Result<_, _>>()?;
    let rows = per_probe
        .into_iter()
        .enumerate()
        .flat_map(|(p, rows)| rows.into_iter().map(move |(c, s)| (p as u32, c, s)))
        .collect();
    Ok(ActivationMatrix {
        n_surfaces: surfaces.len(),
        n_probes: probes.len(),
        rows,
    })
}

/// Relaxed optimum of the selection program for `A`.
pub fn solve_relaxed(a: &ActivationMatrix) -> Result<LpSolution, SelectError> {
    solve_l1(&a.compress().problem()).map(|mut s| {
        let empty = (a.total_rows() - a.rows.len()) as f64;
        s.lower_bound += empty;
        s.objective += empty;
        s
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectParams {
    /// Target spacing between selected surfaces.
    pub gamma: f64,
    /// Probe spacing as a fraction of `gamma`.
    pub eps: f64,
    pub rng_seed: u64,
    pub tol_fix: f64,
    /// Largest number of weights branch and bound may decide.
    pub max_free: usize,
}

impl SelectParams {
    pub fn new(gamma: f64, eps: f64, rng_seed: u64) -> Self {
        Self {
            gamma,
            eps,
            rng_seed,
            tol_fix: 1e-3,
            max_free: 40,
        }
    }

    /// Half-width of the activation band: neighbouring surfaces `gamma`
    /// apart then tile the probes without overlap.
    pub fn band(&self) -> f64 {
        0.5 * self.gamma
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    #[serde(rename = "n_S")]
    pub n_s: usize,
    pub n_p: usize,
    pub relaxed_objective: f64,
    pub binary_objective: f64,
    pub fixed_fraction: f64,
    pub selected_ids: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct Selection {
    pub result: SelectionResult,
    pub matrix: ActivationMatrix,
    pub report: SelectionReport,
}

impl Selection {
    /// Indices into the candidate list.
    pub fn selected(&self) -> Vec<usize> {
        self.result.selected()
    }
}

/// Full selection: probes, activation, relaxation and exact cleanup. With at
/// most `max_free` candidates nothing is fixed from the relaxation, so the
/// result is the exact optimum.
pub fn select(
    surfaces: &[StreamSurface],
    g: &FrameGrid,
    mask: Option<&SingularMask>,
    params: &SelectParams,
) -> Result<Selection, SelectError> {
    if surfaces.is_empty() {
        return Err(SelectError::InvalidParam("no candidate surfaces".into()));
    }
    if !(params.eps > 0.0 && params.eps < 1.0) || !(params.gamma > 0.0) {
        return Err(SelectError::InvalidParam(format!(
            "gamma = {}, epsilon = {}",
            params.gamma, params.eps
        )));
    }
    let probes = ProbeGrid::new(g, mask, params.gamma, params.eps, params.rng_seed)?;
    let matrix = compute_activation(surfaces, &probes, g, params.band())?;
    let rows = matrix.compress();
    let relaxed = solve_l1(&rows.problem())?;
    let relaxed_objective = relaxed.lower_bound + rows.empty as f64;
    let tol_fix = if surfaces.len() <= params.max_free { -1.0 } else { params.tol_fix };
    let result = finalize_binary(&rows, &relaxed.w, relaxed_objective, tol_fix, params.max_free)?;
    let report = SelectionReport {
        n_s: surfaces.len(),
        n_p: probes.len(),
        relaxed_objective,
        binary_objective: result.objective,
        fixed_fraction: result.fixed_fraction(),
        selected_ids: result.selected().iter().map(|&i| surfaces[i].id).collect(),
    };
    Ok(Selection {
        result,
        matrix,
        report,
    })
}

#[cfg(test)]
mod tests;
