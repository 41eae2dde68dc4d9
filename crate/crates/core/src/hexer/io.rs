use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{HexError, HexMesh, QualityReport};

impl HexMesh {
    /// Legacy ASCII VTK unstructured grid, cell type 12.
    pub fn to_vtk(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# vtk DataFile Version 3.0\nlamina hex mesh\nASCII\nDATASET UNSTRUCTURED_GRID");
        let _ = writeln!(out, "POINTS {} double", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(out, "{} {} {}", v.x, v.y, v.z);
        }
        let _ = writeln!(out, "CELLS {} {}", self.cells.len(), 9 * self.cells.len());
        for c in &self.cells {
            let ids: Vec<String> = c.iter().map(u32::to_string).collect();
            let _ = writeln!(out, "8 {}", ids.join(" "));
        }
        let _ = writeln!(out, "CELL_TYPES {}", self.cells.len());
        for _ in &self.cells {
            out.push_str("12\n");
        }
        out
    }

    /// MEDIT `.mesh` with one-based indices.
    pub fn to_medit(&self) -> String {
        let mut out = String::from("MeshVersionFormatted 2\nDimension 3\n");
        let _ = writeln!(out, "Vertices\n{}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(out, "{} {} {} 0", v.x, v.y, v.z);
        }
        let _ = writeln!(out, "Hexahedra\n{}", self.cells.len());
        for c in &self.cells {
            let ids: Vec<String> = c.iter().map(|i| (i + 1).to_string()).collect();
            let _ = writeln!(out, "{} 0", ids.join(" "));
        }
        out.push_str("End\n");
        out
    }

    pub fn write_vtk(&self, path: impl AsRef<Path>) -> Result<(), HexError> {
        fs::write(path, self.to_vtk())?;
        Ok(())
    }

    pub fn write_medit(&self, path: impl AsRef<Path>) -> Result<(), HexError> {
        fs::write(path, self.to_medit())?;
        Ok(())
    }
}

impl QualityReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), HexError> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        fs::write(path, text + "\n")?;
        Ok(())
    }
}
