#![allow(dead_code)]

use dtsim_core::rng::{keyed, Domain};
use dtsim_core::{TriangleMesh, Vec3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(key: u64) -> ChaCha8Rng {
    keyed(0x5eed, Domain::Test, key)
}

pub fn point_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec3 {
    Vec3::new(rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi))
}

pub fn unit_vector(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = point_in(rng, -1.0, 1.0);
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Triangle soup of `n` independent small triangles scattered in a cube.
pub fn random_soup(rng: &mut ChaCha8Rng, n: usize, extent: f64, size: f64) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(3 * n);
    let mut triangles = Vec::with_capacity(n);
    while triangles.len() < n {
        let c = point_in(rng, -extent, extent);
        let tri = [c + point_in(rng, -size, size), c + point_in(rng, -size, size), c + point_in(rng, -size, size)];
        if dtsim_core::geometry::triangle_area(tri[0], tri[1], tri[2]) < 1e-3 * size * size {
            continue;
        }
        let base = vertices.len() as u32;
        vertices.extend_from_slice(&tri);
        triangles.push([base, base + 1, base + 2]);
    }
    let tags = (0..n as u32).map(|i| i % 5).collect();
    TriangleMesh::new(vertices, triangles, tags).unwrap()
}

/// Reference closest distance by sampling the triangle on a barycentric grid.
pub fn grid_distance(p: Vec3, [a, b, c]: [Vec3; 3], steps: usize) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        for j in 0..=steps - i {
            let u = i as f64 / steps as f64;
            let v = j as f64 / steps as f64;
            let q = a + (b - a) * u + (c - a) * v;
            best = best.min(p.distance(q));
        }
    }
    best
}

/// Closest distance from `p` to the triangle, by projecting onto the plane and
/// falling back to the three edges.
pub fn triangle_distance_oracle(p: Vec3, [a, b, c]: [Vec3; 3]) -> f64 {
    let n = (b - a).cross(c - a);
    let n2 = n.norm_squared();
    let t = (p - a).dot(n) / n2;
    let q = p - n * t;
    let w_a = (b - q).cross(c - q).dot(n) / n2;
    let w_b = (c - q).cross(a - q).dot(n) / n2;
    let w_c = 1.0 - w_a - w_b;
    if w_a >= 0.0 && w_b >= 0.0 && w_c >= 0.0 {
        return p.distance(q);
    }
    segment_distance(p, a, b).min(segment_distance(p, b, c)).min(segment_distance(p, c, a))
}

pub fn segment_distance(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = b - a;
    let s = ((p - a).dot(ab) / ab.norm_squared()).clamp(0.0, 1.0);
    p.distance(a + ab * s)
}

pub fn mesh_distance_oracle(p: Vec3, mesh: &TriangleMesh) -> f64 {
    (0..mesh.len()).map(|i| triangle_distance_oracle(p, mesh.triangle(i))).fold(f64::INFINITY, f64::min)
}

/// Ray parameter of the hit against `tri` by plane intersection and
/// barycentric containment, or `None`.
pub fn ray_plane_hit(origin: Vec3, dir: Vec3, t_max: f64, [a, b, c]: [Vec3; 3]) -> Option<f64> {
    let n = (b - a).cross(c - a);
    let denom = n.dot(dir);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = n.dot(a - origin) / denom;
    if t <= 1e-9 || t > t_max {
        return None;
    }
    let q = origin + dir * t;
    let n2 = n.norm_squared();
    let w_a = (b - q).cross(c - q).dot(n) / n2;
    let w_b = (c - q).cross(a - q).dot(n) / n2;
    let w_c = 1.0 - w_a - w_b;
    (w_a >= 0.0 && w_b >= 0.0 && w_c >= 0.0).then_some(t)
}
