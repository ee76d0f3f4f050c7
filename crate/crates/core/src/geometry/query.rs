use super::{Bvh, GeometryError, TriangleMesh, Vec3, MIN_TRIANGLE_AREA};

/// Determinant threshold for the Möller–Trumbore test.
pub const DETERMINANT_EPSILON: f64 = 1e-9;

/// Hits closer than this to the origin are ignored (self-intersection guard).
const T_MIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    origin: Vec3,
    direction: Vec3,
    inv_direction: Vec3,
    t_max: f64,
}

impl Ray {
    /// Normalizes `direction`.
    pub fn new(origin: Vec3, direction: Vec3, t_max: f64) -> Result<Ray, GeometryError> {
        let direction = direction.normalized().ok_or(GeometryError::InvalidRay)?;
        if !(t_max > 0.0) || !origin.is_finite() {
            return Err(GeometryError::InvalidRay);
        }
        Ok(Ray {
            origin,
            direction,
            inv_direction: Vec3::new(1.0 / direction.x, 1.0 / direction.y, 1.0 / direction.z),
            t_max,
        })
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub(crate) fn inv_direction(&self) -> Vec3 {
        self.inv_direction
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Vec3,
    pub triangle_index: usize,
    /// Instance id of the intersected object, 0 for the static scene.
    pub object_id: u32,
}

/// Möller–Trumbore. Returns the ray parameter of the hit, edges inclusive.
#[inline]
pub fn ray_triangle(ray: &Ray, [a, b, c]: [Vec3; 3]) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = ray.direction.cross(e2);
    let det = e1.dot(p);
    if det.abs() < DETERMINANT_EPSILON {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = ray.origin - a;
    let u = s.dot(p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = ray.direction.dot(q) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv_det;
    (t > T_MIN && t <= ray.t_max).then_some(t)
}

/// `true` if `(t, tri)` beats the current best. Ties on `t` go to the lower
/// triangle index so traversal order never changes the answer.
#[inline]
pub(crate) fn better(t: f64, tri: usize, best: Option<(f64, usize)>) -> bool {
    match best {
        None => true,
        Some((bt, bi)) => t < bt || (t == bt && tri < bi),
    }
}

/// Nearest hit along `ray`, using the BVH to prune.
pub fn intersect(ray: &Ray, bvh: &Bvh, mesh: &TriangleMesh) -> Option<Hit> {
    bvh.nearest_hit(ray, mesh).map(|(t, tri)| Hit {
        t,
        point: ray.at(t),
        triangle_index: tri,
        object_id: 0,
    })
}

/// Reference implementation: tests every triangle.
pub fn intersect_brute_force(ray: &Ray, mesh: &TriangleMesh) -> Option<Hit> {
    let mut best = None;
    for i in 0..mesh.len() {
        if let Some(t) = ray_triangle(ray, mesh.triangle(i)) {
            if better(t, i, best) {
                best = Some((t, i));
            }
        }
    }
    best.map(|(t, tri)| Hit { t, point: ray.at(t), triangle_index: tri, object_id: 0 })
}

/// Closest point on the closed triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: Vec3, [a, b, c]: [Vec3; 3]) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[inline]
pub(crate) fn triangle_distance_squared(p: Vec3, tri: [Vec3; 3]) -> f64 {
    p.distance_squared(closest_point_on_triangle(p, tri))
}

/// Euclidean distance from `p` to the closed triangle.
pub fn point_to_triangle_distance(p: Vec3, tri: [Vec3; 3]) -> Result<f64, GeometryError> {
    if super::triangle_area(tri[0], tri[1], tri[2]) <= MIN_TRIANGLE_AREA {
        return Err(GeometryError::DegenerateInput);
    }
    Ok(triangle_distance_squared(p, tri).sqrt())
}

/// Distance from `p` to the nearest point on any triangle of the mesh.
pub fn point_to_mesh_distance(p: Vec3, bvh: &Bvh, mesh: &TriangleMesh) -> Result<f64, GeometryError> {
    if mesh.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    Ok(bvh.nearest_distance_squared(p, mesh).sqrt())
}

pub fn point_to_mesh_distance_brute_force(p: Vec3, mesh: &TriangleMesh) -> Result<f64, GeometryError> {
    if mesh.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    let d2 = (0..mesh.len())
        .map(|i| triangle_distance_squared(p, mesh.triangle(i)))
        .fold(f64::INFINITY, f64::min);
    Ok(d2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_tri() -> [Vec3; 3] {
        [Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)]
    }

    #[test]
    fn axis_aligned_hit() {
        let mesh = TriangleMesh::with_tag(unit_tri().to_vec(), vec![[0, 1, 2]], 0).unwrap();
        let bvh = Bvh::build(&mesh).unwrap();
        let ray = Ray::new(Vec3::new(0.25, 0.25, 1.0), Vec3::new(0.0, 0.0, -1.0), 100.0).unwrap();
        let hit = intersect(&ray, &bvh, &mesh).unwrap();
        assert_eq!(hit.t, 1.0);
        assert_eq!(hit.point, Vec3::new(0.25, 0.25, 0.0));
        assert_eq!(hit.triangle_index, 0);
        assert_eq!(hit.object_id, 0);

        let short = Ray::new(Vec3::new(0.25, 0.25, 1.0), Vec3::new(0.0, 0.0, -1.0), 0.5).unwrap();
        assert_eq!(intersect(&short, &bvh, &mesh), None);
    }

    #[test]
    fn parallel_ray_misses() {
        let ray = Ray::new(Vec3::new(0.25, 0.25, 0.0), Vec3::new(1.0, 0.0, 0.0), 10.0).unwrap();
        assert_eq!(ray_triangle(&ray, unit_tri()), None);
    }

    #[test]
    fn ray_constructor_validates() {
        assert_eq!(Ray::new(Vec3::ZERO, Vec3::ZERO, 1.0), Err(GeometryError::InvalidRay));
        assert_eq!(Ray::new(Vec3::ZERO, Vec3::UNIT_Z, 0.0), Err(GeometryError::InvalidRay));
        let r = Ray::new(Vec3::ZERO, Vec3::new(3.0, 4.0, 0.0), 1.0).unwrap();
        assert!((r.direction().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distance_regions() {
        let tri = unit_tri();
        assert_eq!(point_to_triangle_distance(Vec3::new(0.0, 0.0, 1.0), tri).unwrap(), 1.0);
        assert_eq!(point_to_triangle_distance(Vec3::new(2.0, 0.0, 0.0), tri).unwrap(), 1.0);
        // edge region of the hypotenuse
        let d = point_to_triangle_distance(Vec3::new(1.0, 1.0, 0.0), tri).unwrap();
        assert!((d - 0.5_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_triangle_is_an_error() {
        let tri = [Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)];
        assert_eq!(point_to_triangle_distance(Vec3::UNIT_Z, tri), Err(GeometryError::DegenerateInput));
    }

    #[test]
    fn distance_to_mesh_vertex_is_zero() {
        let mesh = TriangleMesh::ground_plane(5.0, 0.0, 1).unwrap();
        let bvh = Bvh::build(&mesh).unwrap();
        assert_eq!(point_to_mesh_distance(Vec3::new(5.0, 5.0, 0.0), &bvh, &mesh).unwrap(), 0.0);
        let d = point_to_mesh_distance(Vec3::new(1.2, -3.1, 0.795), &bvh, &mesh).unwrap();
        assert!((d - 0.795).abs() < 1e-15);
    }
}
