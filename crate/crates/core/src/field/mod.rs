//! Volumetric frame fields with per-layer relative thicknesses.

mod frame;
mod generators;
mod grid;
pub mod io;

use thiserror::Error;

pub use frame::{closest_frame_vector, relative_rotation_angle, Frame};
pub use generators::{
    gen_cylinder_field, gen_embedded_singularity_field, gen_helicoid_field, CylinderField,
    EmbeddedSingularityField, GeneratorParams, HelicoidField,
};
pub use grid::{
    classify_voxel, layer_traceable, FrameGrid, FrameSource, GridSpec, Thresholds, VoxelClass,
};
pub use io::{load_field, load_field_with, save_field};


#[derive(Debug, Error)]
pub enum FieldError {
    #[error("position {x:?} is outside the field")]
    OutOfBounds { x: [f64; 3] },
    #[error("frame undefined at {x:?}")]
    Degenerate { x: [f64; 3] },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("payload holds {found} records, header declares {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("record {index} is not an orthonormal frame")]
    NonOrthogonalFrame { index: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
