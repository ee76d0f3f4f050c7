use super::{Aabb, GeometryError, Vec3};

/// Triangles with area at or below this (m²) are rejected as degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Indexed triangle soup with one semantic label per triangle.
///
/// Construction through [`TriangleMesh::new`] validates every invariant, so
/// downstream kernels never see out-of-range indices, non-finite vertices or
/// zero-area triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    semantic: Vec<u32>,
}

impl TriangleMesh {
    pub fn new(
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        semantic: Vec<u32>,
    ) -> Result<Self, GeometryError> {
        if semantic.len() != triangles.len() {
            return Err(GeometryError::TagCountMismatch {
                triangles: triangles.len(),
                tags: semantic.len(),
            });
        }
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(GeometryError::NonFiniteVertex(i));
        }
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i as usize >= n) {
                return Err(GeometryError::IndexOutOfRange { triangle: t, index: bad, vertex_count: n });
            }
            let [a, b, c] = tri.map(|i| vertices[i as usize]);
            if triangle_area(a, b, c) <= MIN_TRIANGLE_AREA {
                return Err(GeometryError::DegenerateTriangle(t));
            }
        }
        Ok(Self { vertices, triangles, semantic })
    }

    /// Mesh with every triangle tagged `tag`.
    pub fn with_tag(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>, tag: u32) -> Result<Self, GeometryError> {
        let semantic = vec![tag; triangles.len()];
        Self::new(vertices, triangles, semantic)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn semantic(&self) -> &[u32] {
        &self.semantic
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    #[inline]
    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        self.triangles[i].map(|v| self.vertices[v as usize])
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle(i);
        triangle_area(a, b, c)
    }

    pub fn centroid(&self, i: usize) -> Vec3 {
        let [a, b, c] = self.triangle(i);
        (a + b + c) / 3.0
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.len()).map(|i| self.triangle_area(i)).sum()
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter().copied())
    }

    /// Keeps the listed triangles (in the given order) and drops vertices no
    /// longer referenced. Surviving vertices keep their relative order.
    pub fn subset(&self, keep: &[usize]) -> TriangleMesh {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        for &t in keep {
            for &v in &self.triangles[t] {
                remap[v as usize] = 0;
            }
        }
        let mut vertices = Vec::new();
        for (i, slot) in remap.iter_mut().enumerate() {
            if *slot == 0 {
                *slot = vertices.len() as u32;
                vertices.push(self.vertices[i]);
            }
        }
        let triangles = keep.iter().map(|&t| self.triangles[t].map(|v| remap[v as usize])).collect();
        let semantic = keep.iter().map(|&t| self.semantic[t]).collect();
        TriangleMesh { vertices, triangles, semantic }
    }

    /// Concatenates meshes, offsetting indices.
    pub fn merge(parts: &[&TriangleMesh]) -> TriangleMesh {
        let mut out = TriangleMesh { vertices: Vec::new(), triangles: Vec::new(), semantic: Vec::new() };
        for m in parts {
            let base = out.vertices.len() as u32;
            out.vertices.extend_from_slice(&m.vertices);
            out.triangles.extend(m.triangles.iter().map(|t| t.map(|v| v + base)));
            out.semantic.extend_from_slice(&m.semantic);
        }
        out
    }

    /// Axis-aligned box centred at `center`, rotated by `yaw` about +z.
    pub fn oriented_box(center: Vec3, dims: Vec3, yaw: f64, tag: u32) -> Result<TriangleMesh, GeometryError> {
        let (s, c) = yaw.sin_cos();
        let h = dims / 2.0;
        let mut vertices = Vec::with_capacity(8);
        for &z in &[-h.z, h.z] {
            for &(x, y) in &[(-h.x, -h.y), (h.x, -h.y), (h.x, h.y), (-h.x, h.y)] {
                vertices.push(center + Vec3::new(c * x - s * y, s * x + c * y, z));
            }
        }
        // outward-facing winding
        let triangles = vec![
            [0, 2, 1], [0, 3, 2], // bottom
            [4, 5, 6], [4, 6, 7], // top
            [0, 1, 5], [0, 5, 4],
            [1, 2, 6], [1, 6, 5],
            [2, 3, 7], [2, 7, 6],
            [3, 0, 4], [3, 4, 7],
        ];
        TriangleMesh::with_tag(vertices, triangles, tag)
    }

    /// Flat square of side `2·half` at height `z`, two triangles.
    pub fn ground_plane(half: f64, z: f64, tag: u32) -> Result<TriangleMesh, GeometryError> {
        let vertices = vec![
            Vec3::new(-half, -half, z),
            Vec3::new(half, -half, z),
            Vec3::new(half, half, z),
            Vec3::new(-half, half, z),
        ];
        TriangleMesh::with_tag(vertices, vec![[0, 1, 2], [0, 2, 3]], tag)
    }
}

#[inline]
pub fn triangle_area(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    0.5 * (b - a).cross(c - a).norm()
}
