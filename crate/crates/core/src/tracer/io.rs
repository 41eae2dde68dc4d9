//! Surfaces on disk: one ASCII PLY per surface plus a JSON manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{StreamSurface, TraceError};
use crate::field::io::encode_field;
use crate::field::FrameGrid;
use crate::Vec3;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceManifest {
    pub r: f64,
    pub r_fine: Option<f64>,
    /// Hex SHA-256 of the encoded field the surfaces were traced in.
    pub field_hash: String,
    pub surface_ids: Vec<u32>,
}

pub fn field_hash(g: &FrameGrid) -> String {
    let digest = Sha256::digest(encode_field(g));
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn surface_file_name(id: u32) -> String {
    format!("surface_{id:05}.ply")
}

pub fn ply_string(s: &StreamSurface) -> String {
    let mut out = String::with_capacity(64 * s.len() + 256);
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "comment id {}", s.id);
    let _ = writeln!(out, "comment r {:e}", s.r);
    let _ = writeln!(out, "element vertex {}", s.len());
    for p in ["x", "y", "z", "nx", "ny", "nz"] {
        let _ = writeln!(out, "property double {p}");
    }
    out.push_str("end_header\n");
    for (p, n) in s.points.iter().zip(&s.normals) {
        // {:e} prints the shortest representation that round-trips
        let _ = writeln!(out, "{:e} {:e} {:e} {:e} {:e} {:e}", p.x, p.y, p.z, n.x, n.y, n.z);
    }
    out
}

pub fn parse_ply(text: &str) -> Result<StreamSurface, TraceError> {
    let bad = |m: &str| TraceError::Format(format!("ply: {m}"));
    let mut lines = text.lines();
    if lines.next() != Some("ply") {
        return Err(bad("missing magic"));
    }
    let (mut id, mut r, mut count) = (0u32, 0.0f64, None);
    for line in lines.by_ref() {
        let mut w = line.split_whitespace();
        match (w.next(), w.next(), w.next()) {
            (Some("end_header"), _, _) => break,
            (Some("comment"), Some("id"), Some(v)) => id = v.parse().map_err(|_| bad("id"))?,
            (Some("comment"), Some("r"), Some(v)) => r = v.parse().map_err(|_| bad("r"))?,
            (Some("element"), Some("vertex"), Some(v)) => {
                count = Some(v.parse::<usize>().map_err(|_| bad("vertex count"))?)
            }
            _ => {}
        }
    }
    let count = count.ok_or_else(|| bad("no vertex element"))?;
    let mut points = Vec::with_capacity(count);
    let mut normals = Vec::with_capacity(count);
    for line in lines.take(count) {
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| bad("vertex record"))?;
        if v.len() != 6 {
            return Err(bad("vertex record"));
        }
        points.push(Vec3::new(v[0], v[1], v[2]));
        normals.push(Vec3::new(v[3], v[4], v[5]));
    }
    if points.len() != count {
        return Err(bad("truncated vertex list"));
    }
    Ok(StreamSurface { id, points, normals, r })
}

pub fn write_ply(s: &StreamSurface, path: impl AsRef<Path>) -> Result<(), TraceError> {
    fs::write(path, ply_string(s))?;
    Ok(())
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<StreamSurface, TraceError> {
    parse_ply(&fs::read_to_string(path)?)
}

/// Write every surface and the manifest into `dir`, creating it if needed.
pub fn write_surface_set(
    dir: impl AsRef<Path>,
    surfaces: &[StreamSurface],
    manifest: &SurfaceManifest,
) -> Result<(), TraceError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    // surfaces left over from an earlier set would make the directory
    // depend on its history
    let keep: Vec<String> = surfaces.iter().map(|s| surface_file_name(s.id)).collect();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if name.starts_with("surface_") && name.ends_with(".ply") && !keep.contains(&name) {
            fs::remove_file(dir.join(name))?;
        }
    }
    for (s, name) in surfaces.iter().zip(&keep) {
        write_ply(s, dir.join(name))?;
    }
    let json = serde_json::to_string_pretty(manifest).map_err(|e| TraceError::Format(e.to_string()))?;
    fs::write(dir.join(MANIFEST_NAME), json)?;
    Ok(())
}

/// Read a directory written by [`write_surface_set`]. Surfaces come back in
/// manifest order.
pub fn read_surface_set(
    dir: impl AsRef<Path>,
) -> Result<(SurfaceManifest, Vec<StreamSurface>), TraceError> {
    let dir: PathBuf = dir.as_ref().into();
    let text = fs::read_to_string(dir.join(MANIFEST_NAME))?;
    let manifest: SurfaceManifest =
        serde_json::from_str(&text).map_err(|e| TraceError::Format(e.to_string()))?;
    let surfaces = manifest
        .surface_ids
        .iter()
        .map(|&id| read_ply(dir.join(surface_file_name(id))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((manifest, surfaces))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ply_round_trip_is_exact() {
        let s = StreamSurface {
            id: 7,
            points: vec![Vec3::new(0.1, -2.5e-7, 1.0 / 3.0), Vec3::new(9.0, 8.0, 7.0)],
            normals: vec![Vec3::z(), Vec3::new(0.6, 0.8, 0.0)],
            r: 0.3,
        };
        assert_eq!(parse_ply(&ply_string(&s)).unwrap(), s);
    }

    #[test]
    fn set_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let surfaces: Vec<StreamSurface> = (0..3)
            .map(|id| StreamSurface {
                id,
                points: vec![Vec3::repeat(id as f64)],
                normals: vec![Vec3::x()],
                r: 1.0,
            })
            .collect();
        let manifest = SurfaceManifest {
            r: 1.0,
            r_fine: None,
            field_hash: "00".into(),
            surface_ids: vec![0, 1, 2],
        };
        write_surface_set(dir.path(), &surfaces, &manifest).unwrap();
        let (m, back) = read_surface_set(dir.path()).unwrap();
        assert_eq!(m, manifest);
        assert_eq!(back, surfaces);
        // rewriting a subset clears the others but leaves foreign files
        fs::write(dir.path().join("notes.txt"), "keep").unwrap();
        let sub = SurfaceManifest { surface_ids: vec![1], ..manifest };
        write_surface_set(dir.path(), &surfaces[1..2], &sub).unwrap();
        let mut names: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        assert_eq!(names, [MANIFEST_NAME, "notes.txt", "surface_00001.ply"]);
    }

    #[test]
    fn truncated_ply_rejected() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nend_header\n1 2 3 0 0 1\n";
        assert!(parse_ply(text).is_err());
    }
}
