//! Stream surface tracing.
//!
//! Surfaces grow from a seed by Poisson-disk front propagation. Candidate
//! points come from RK4 steps whose direction is re-projected into the local
//! tangent plane at every stage, are refined against nearby points and then
//! checked for spacing, spiralling and traceability.

pub mod io;
mod pds;
mod step;
mod surface;

use thiserror::Error;

use crate::field::FieldError;

pub use pds::PointIndex;
pub use step::{parallel_transport, rk4_step};
pub use surface::{
    accept_point, generate_surface_set, refine_point, smooth_surface, supersample_surface,
    surface_rng, trace_surface, Rejection, SeedParams, StreamSurface, TraceParams,
};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("step direction is parallel to the surface normal")]
    DegenerateProjection,
    #[error("seed rejected: {0:?}")]
    SeedRejected(Rejection),
    #[error("no traceable voxel outside the singularity mask")]
    InsufficientDomain,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("{0}")]
    Format(String),
}

impl From<std::io::Error> for TraceError {
    fn from(e: std::io::Error) -> Self {
        TraceError::Field(FieldError::Io(e))
    }
}
