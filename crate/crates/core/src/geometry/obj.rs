//! Wavefront OBJ subset: `v x y z` and triangular `f i j k` records with
//! 1-based indices. A `# semantic:<name>` comment tags every following face
//! until the next such comment; faces before any tag are background.
//!
//! Normals, texture coordinates, groups and material statements are skipped.

use std::fmt::Write as _;

use thiserror::Error;

use super::{GeometryError, TriangleMesh, Vec3};
use crate::palette::{SemanticPalette, BACKGROUND};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: {source}")]
    Geometry { line: usize, source: GeometryError },
    #[error("{0}")]
    Mesh(GeometryError),
}

pub fn parse_obj(text: &str, palette: &mut SemanticPalette) -> Result<TriangleMesh, ObjError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut semantic = Vec::new();
    let mut face_lines = Vec::new();
    let mut tag = BACKGROUND;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let malformed = |message: String| ObjError::Malformed { line: line_no, message };
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(name) = comment.trim().strip_prefix("semantic:") {
                let name = name.trim();
                if name.is_empty() {
                    return Err(malformed("empty semantic name".into()));
                }
                tag = palette.intern(name);
            }
            continue;
        }
        let mut fields = line.split_whitespace();
        let Some(kind) = fields.next() else { continue };
        match kind {
            "v" => {
                let coords: Vec<&str> = fields.collect();
                if coords.len() != 3 {
                    return Err(malformed(format!("vertex needs 3 coordinates, found {}", coords.len())));
                }
                let mut xyz = [0.0; 3];
                for (slot, s) in xyz.iter_mut().zip(&coords) {
                    *slot = s.parse().map_err(|_| malformed(format!("bad coordinate '{s}'")))?;
                }
                vertices.push(Vec3::from(xyz));
            }
            "f" => {
                let refs: Vec<&str> = fields.collect();
                if refs.len() != 3 {
                    return Err(malformed(format!("only triangular faces are supported, found {} vertices", refs.len())));
                }
                let mut tri = [0u32; 3];
                for (slot, r) in tri.iter_mut().zip(&refs) {
                    let first = r.split('/').next().unwrap_or("");
                    let i: u32 = first.parse().map_err(|_| malformed(format!("bad vertex index '{r}'")))?;
                    if i == 0 || i as usize > vertices.len() {
                        return Err(malformed(format!("vertex index {i} out of range (1..={})", vertices.len())));
                    }
                    *slot = i - 1;
                }
                triangles.push(tri);
                semantic.push(tag);
                face_lines.push(line_no);
            }
            "vn" | "vt" | "vp" | "o" | "g" | "s" | "mtllib" | "usemtl" | "l" => {}
            other => return Err(malformed(format!("unsupported record '{other}'"))),
        }
    }

    TriangleMesh::new(vertices, triangles, semantic).map_err(|e| match e {
        GeometryError::DegenerateTriangle(t) => ObjError::Geometry { line: face_lines[t], source: e },
        GeometryError::NonFiniteVertex(_) => ObjError::Mesh(e),
        other => ObjError::Mesh(other),
    })
}

/// Serializes the mesh in the same subset `parse_obj` reads. Coordinates are
/// written with shortest round-trip formatting so parse(write(m)) == m.
pub fn write_obj(mesh: &TriangleMesh, palette: &SemanticPalette) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    let mut current = BACKGROUND;
    for (tri, &tag) in mesh.triangles().iter().zip(mesh.semantic()) {
        if tag != current {
            let name = palette.name(tag).map(str::to_string).unwrap_or_else(|| format!("class{tag}"));
            let _ = writeln!(out, "# semantic:{name}");
            current = tag;
        }
        let _ = writeln!(out, "f {} {} {}", tri[0] + 1, tri[1] + 1, tri[2] + 1);
    }
    out
}
