//! Geometry kernels shared by every stage: vectors, triangle meshes, the BVH,
//! ray casting and point-to-surface distances.

mod bvh;
mod mesh;
pub mod obj;
mod query;
mod vec3;

pub use bvh::{Bvh, BvhNode, MAX_LEAF_SIZE};
pub use mesh::{triangle_area, TriangleMesh, MIN_TRIANGLE_AREA};
pub use query::{
    closest_point_on_triangle, point_to_mesh_distance, point_to_mesh_distance_brute_force,
    point_to_triangle_distance, ray_triangle, intersect, intersect_brute_force, Hit, Ray,
    DETERMINANT_EPSILON,
};
pub use vec3::{Aabb, Vec3};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("triangle {0} is degenerate (area <= 1e-12 m²)")]
    DegenerateTriangle(usize),
    #[error("triangle is degenerate (area <= 1e-12 m²)")]
    DegenerateInput,
    #[error("triangle {triangle} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange { triangle: usize, index: u32, vertex_count: usize },
    #[error("vertex {0} has a non-finite coordinate")]
    NonFiniteVertex(usize),
    #[error("{tags} semantic tags given for {triangles} triangles")]
    TagCountMismatch { triangles: usize, tags: usize },
    #[error("ray direction must be non-zero and finite, t_max positive")]
    InvalidRay,
}
