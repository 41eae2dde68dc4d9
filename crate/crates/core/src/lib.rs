//! Frame-aligned multi-laminar structures from volumetric frame fields.
//!
//! The pipeline traces point-sampled stream surfaces through a frame field
//! ([`tracer`]), keeps an evenly spaced subset by solving a relaxed binary L1
//! program ([`selector`]) and turns the result into either a voxel solid
//! ([`splatter`]) or a hexahedral mesh ([`hexer`]). Singular curves are masked
//! out beforehand ([`singularity`]).

pub mod field;
pub mod singularity;
pub mod tracer;
pub mod selector;
pub mod splatter;
pub mod hexer;
pub mod pipeline;
pub mod fixtures;

/// World-space vector type used throughout.
pub type Vec3 = nalgebra::Vector3<f64>;
