//! `.ffield` reader/writer.
//!
//! Line one is a JSON header `{"dims":[nx,ny,nz],"spacing":h,"origin":[x,y,z],"version":1}`
//! followed by `\n` and `nx*ny*nz` little-endian `f32` records of twelve
//! values each: `m1(3) m2(3) m3(3) t(3)`, x fastest.

use std::fs;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::frame::Frame;
use super::grid::{FrameGrid, GridSpec, Thresholds};
use super::FieldError;
use crate::Vec3;

pub const FORMAT_VERSION: u32 = 1;
const FLOATS_PER_RECORD: usize = 12;
const ORTHO_TOLERANCE: f64 = 1e-4;

/// Header line shared by `.ffield`, mask and volume files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub origin: [f64; 3],
    pub version: u32,
}

impl GridHeader {
    pub fn from_spec(spec: &GridSpec) -> Self {
        Self {
            dims: spec.dims,
            spacing: spec.spacing,
            origin: spec.origin,
            version: FORMAT_VERSION,
        }
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            dims: self.dims,
            spacing: self.spacing,
            origin: self.origin,
        }
    }

    pub(crate) fn write_line<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let line = serde_json::to_string(self).map_err(std::io::Error::other)?;
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")
    }

    /// Parse the header line and validate it.
    pub(crate) fn read_line<R: BufRead>(mut r: R) -> Result<(Self, R), FieldError> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        if !line.ends_with('\n') {
            return Err(FieldError::MalformedHeader("missing header line".into()));
        }
        let header: GridHeader = serde_json::from_str(line.trim_end())
            .map_err(|e| FieldError::MalformedHeader(e.to_string()))?;
        if header.version != FORMAT_VERSION {
            return Err(FieldError::MalformedHeader(format!(
                "unsupported version {}",
                header.version
            )));
        }
        if header.dims.iter().any(|&d| d == 0) {
            return Err(FieldError::MalformedHeader(format!(
                "dims must be positive, got {:?}",
                header.dims
            )));
        }
        if !(header.spacing > 0.0) || !header.spacing.is_finite() {
            return Err(FieldError::MalformedHeader(format!(
                "spacing must be positive, got {}",
                header.spacing
            )));
        }
        Ok((header, r))
    }
}

/// Serialize a grid to bytes.
pub fn encode_field(g: &FrameGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(128 + g.frames().len() * FLOATS_PER_RECORD * 4);
    GridHeader::from_spec(g.spec())
        .write_line(&mut out)
        .expect("writing to a Vec cannot fail");
    for f in g.frames() {
        for v in f.m.iter() {
            for a in 0..3 {
                out.extend_from_slice(&(v[a] as f32).to_le_bytes());
            }
        }
        for t in f.t {
            out.extend_from_slice(&(t as f32).to_le_bytes());
        }
    }
    out
}

/// Parse a grid from bytes.
pub fn decode_field(bytes: &[u8], thresholds: Thresholds) -> Result<FrameGrid, FieldError> {
    let (header, mut rest) = GridHeader::read_line(bytes)?;
    let spec = header.spec();
    let n = spec.len();
    let mut payload = Vec::new();
    rest.read_to_end(&mut payload)?;
    let want = n * FLOATS_PER_RECORD * 4;
    if payload.len() != want {
        return Err(FieldError::DimensionMismatch {
            expected: n,
            found: payload.len() / (FLOATS_PER_RECORD * 4),
        });
    }
    let floats: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let mut frames = Vec::with_capacity(n);
    for (i, rec) in floats.chunks_exact(FLOATS_PER_RECORD).enumerate() {
        let v = |o: usize| Vec3::new(rec[o], rec[o + 1], rec[o + 2]);
        let f = Frame::new([v(0), v(3), v(6)], [rec[9], rec[10], rec[11]]);
        if !(f.orthonormality_error() <= ORTHO_TOLERANCE) {
            return Err(FieldError::NonOrthogonalFrame { index: i });
        }
        if f.t.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(FieldError::InvalidParam(format!(
                "record {i}: thickness {:?} outside [0, 1]",
                f.t
            )));
        }
        frames.push(f);
    }
    FrameGrid::with_thresholds(spec, frames, thresholds)
}

pub fn save_field(g: &FrameGrid, path: impl AsRef<Path>) -> Result<(), FieldError> {
    fs::write(path, encode_field(g))?;
    Ok(())
}

pub fn load_field(path: impl AsRef<Path>) -> Result<FrameGrid, FieldError> {
    load_field_with(path, Thresholds::default())
}

pub fn load_field_with(
    path: impl AsRef<Path>,
    thresholds: Thresholds,
) -> Result<FrameGrid, FieldError> {
    let bytes = fs::read(path)?;
    decode_field(&bytes, thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::generators::{gen_cylinder_field, GeneratorParams};

    fn cylinder() -> FrameGrid {
        gen_cylinder_field(&GeneratorParams::new([6, 5, 4], 1.0), Vec3::z()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact_on_payload() {
        let g = cylinder();
        let bytes = encode_field(&g);
        let back = decode_field(&bytes, Thresholds::default()).unwrap();
        assert_eq!(back.spec(), g.spec());
        for (a, b) in g.frames().iter().zip(back.frames()) {
            for k in 0..3 {
                for c in 0..3 {
                    assert_eq!((a.m[k][c] as f32) as f64, b.m[k][c]);
                }
                assert_eq!((a.t[k] as f32) as f64, b.t[k]);
            }
        }
        assert_eq!(encode_field(&back), bytes);
    }

    #[test]
    fn truncated_payload_is_dimension_mismatch() {
        let mut bytes = encode_field(&cylinder());
        bytes.truncate(bytes.len() - 4);
        assert!(matches!(
            decode_field(&bytes, Thresholds::default()),
            Err(FieldError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_dims_is_malformed() {
        let bytes = b"{\"dims\":[0,4,4],\"spacing\":1.0,\"origin\":[0,0,0],\"version\":1}\n";
        assert!(matches!(
            decode_field(bytes, Thresholds::default()),
            Err(FieldError::MalformedHeader(_))
        ));
        assert!(matches!(
            decode_field(b"not json\n", Thresholds::default()),
            Err(FieldError::MalformedHeader(_))
        ));
    }

    #[test]
    fn skewed_frame_rejected() {
        let g = cylinder();
        let mut bytes = encode_field(&g);
        let header_len = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
        // tilt m2 of record 0 towards m1
        let off = header_len + 3 * 4;
        let v = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) + 0.01;
        bytes[off..off + 4].copy_from_slice(&v.to_le_bytes());
        assert!(matches!(
            decode_field(&bytes, Thresholds::default()),
            Err(FieldError::NonOrthogonalFrame { index: 0 })
        ));
    }
}
