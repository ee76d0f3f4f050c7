mod common;

use common::*;
use dtsim_core::geometry::{
    intersect, intersect_brute_force, point_to_mesh_distance, point_to_triangle_distance, ray_triangle, BvhNode,
    MAX_LEAF_SIZE,
};
use dtsim_core::{Bvh, Ray, TriangleMesh, Vec3};
use rand::Rng;

fn aimed_ray(rng: &mut rand_chacha::ChaCha8Rng, extent: f64) -> Ray {
    let origin = point_in(rng, -2.0 * extent, 2.0 * extent);
    let target = point_in(rng, -extent, extent);
    Ray::new(origin, target - origin, 10.0 * extent).unwrap()
}

/// Triangles whose leaf boxes the ray enters, found by visiting every node.
fn traversal_candidates(bvh: &Bvh, ray: &Ray) -> Vec<usize> {
    let d = ray.direction();
    let inv = Vec3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z);
    let mut out = Vec::new();
    let mut stack = vec![0];
    while let Some(i) = stack.pop() {
        let node = &bvh.nodes()[i];
        if node.bounds().ray_entry(ray.origin(), inv, ray.t_max()).is_none() {
            continue;
        }
        match *node {
            BvhNode::Leaf { start, count, .. } => out.extend_from_slice(bvh.leaf_triangles(start, count)),
            BvhNode::Interior { left, right, .. } => stack.extend([left, right]),
        }
    }
    out.sort_unstable();
    out
}

#[test]
fn bvh_structure_invariants() {
    let mesh = random_soup(&mut rng(1), 1000, 20.0, 1.5);
    let bvh = Bvh::build(&mesh).unwrap();
    let mut seen = vec![0u32; mesh.len()];
    fn check(bvh: &Bvh, mesh: &TriangleMesh, i: usize, seen: &mut [u32]) -> dtsim_core::Aabb {
        let bounds = *bvh.nodes()[i].bounds();
        match bvh.nodes()[i] {
            BvhNode::Leaf { start, count, .. } => {
                assert!(count <= MAX_LEAF_SIZE);
                for &t in bvh.leaf_triangles(start, count) {
                    seen[t] += 1;
                    for v in mesh.triangle(t) {
                        assert!(bounds.contains(v));
                    }
                }
            }
            BvhNode::Interior { left, right, .. } => {
                for child in [left, right] {
                    let cb = check(bvh, mesh, child, seen);
                    assert!(bounds.contains(cb.min) && bounds.contains(cb.max));
                }
            }
        }
        bounds
    }
    check(&bvh, &mesh, 0, &mut seen);
    assert!(seen.iter().all(|&c| c == 1), "every triangle in exactly one leaf");
    assert_eq!(Bvh::build(&mesh).unwrap(), bvh, "construction is deterministic");
}

#[test]
fn traversal_hit_set_matches_brute_force() {
    let mut r = rng(2);
    let mesh = random_soup(&mut r, 1000, 20.0, 1.5);
    let bvh = Bvh::build(&mesh).unwrap();
    let mut total_hits = 0;
    for _ in 0..100 {
        let ray = aimed_ray(&mut r, 20.0);
        let brute: Vec<usize> = (0..mesh.len()).filter(|&i| ray_triangle(&ray, mesh.triangle(i)).is_some()).collect();
        let candidates = traversal_candidates(&bvh, &ray);
        let traversed: Vec<usize> =
            candidates.into_iter().filter(|&i| ray_triangle(&ray, mesh.triangle(i)).is_some()).collect();
        assert_eq!(traversed, brute);
        total_hits += brute.len();
    }
    assert!(total_hits > 20, "rays should actually hit something ({total_hits})");
}

#[test]
fn nearest_hit_matches_brute_force() {
    let mut r = rng(3);
    let mesh = random_soup(&mut r, 200, 10.0, 2.0);
    let bvh = Bvh::build(&mesh).unwrap();
    let mut hits = 0;
    for _ in 0..1000 {
        let ray = aimed_ray(&mut r, 10.0);
        let fast = intersect(&ray, &bvh, &mesh);
        assert_eq!(fast, intersect_brute_force(&ray, &mesh));

        let oracle = (0..mesh.len())
            .filter_map(|i| ray_plane_hit(ray.origin(), ray.direction(), ray.t_max(), mesh.triangle(i)).map(|t| (t, i)))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        match (fast, oracle) {
            (Some(h), Some((t, i))) => {
                hits += 1;
                assert!((h.t - t).abs() < 1e-9, "t {} vs {}", h.t, t);
                assert!(h.triangle_index == i || (ray_triangle(&ray, mesh.triangle(i)).unwrap() - h.t).abs() < 1e-9);
                assert!(h.point.distance(ray.at(h.t)) < 1e-6);
                assert!(h.t > 0.0 && h.t <= ray.t_max());
            }
            (None, None) => {}
            other => panic!("disagreement {other:?}"),
        }
    }
    assert!(hits > 100, "too few hits to be meaningful ({hits})");
}

#[test]
fn point_triangle_distance_matches_grid_search() {
    let mut r = rng(4);
    for _ in 0..25 {
        let tri = [point_in(&mut r, -1.0, 1.0), point_in(&mut r, -1.0, 1.0), point_in(&mut r, -1.0, 1.0)];
        if dtsim_core::geometry::triangle_area(tri[0], tri[1], tri[2]) < 0.05 {
            continue;
        }
        let p = point_in(&mut r, -2.0, 2.0);
        let d = point_to_triangle_distance(p, tri).unwrap();
        let grid = grid_distance(p, tri, 200);
        assert!(d <= grid + 1e-12, "closed-form must not exceed a sampled distance");
        assert!((d - grid).abs() < 1e-3, "{d} vs grid {grid}");
        assert!((d - triangle_distance_oracle(p, tri)).abs() < 1e-12);
    }
}

#[test]
fn point_mesh_distance_matches_brute_force() {
    let mut r = rng(5);
    let mesh = random_soup(&mut r, 300, 8.0, 1.5);
    let bvh = Bvh::build(&mesh).unwrap();
    for _ in 0..500 {
        let p = point_in(&mut r, -10.0, 10.0);
        let fast = point_to_mesh_distance(p, &bvh, &mesh).unwrap();
        let brute = (0..mesh.len())
            .map(|i| point_to_triangle_distance(p, mesh.triangle(i)).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(fast, brute);
        assert!((fast - mesh_distance_oracle(p, &mesh)).abs() < 1e-12);
    }
}

#[test]
fn queries_are_translation_and_scale_invariant() {
    let mut r = rng(6);
    let mesh = random_soup(&mut r, 150, 5.0, 1.0);
    let shift = Vec3::new(3.25, -7.5, 1.125);
    let scale = 2.5;
    let moved = TriangleMesh::new(
        mesh.vertices().iter().map(|&v| v * scale + shift).collect(),
        mesh.triangles().to_vec(),
        mesh.semantic().to_vec(),
    )
    .unwrap();
    let (b0, b1) = (Bvh::build(&mesh).unwrap(), Bvh::build(&moved).unwrap());
    for _ in 0..200 {
        let p = point_in(&mut r, -6.0, 6.0);
        let d0 = point_to_mesh_distance(p, &b0, &mesh).unwrap();
        let d1 = point_to_mesh_distance(p * scale + shift, &b1, &moved).unwrap();
        assert!((d1 - scale * d0).abs() < 1e-9 * (1.0 + d1));

        let dir = unit_vector(&mut r);
        let h0 = intersect(&Ray::new(p, dir, 100.0).unwrap(), &b0, &mesh);
        let h1 = intersect(&Ray::new(p * scale + shift, dir, 100.0 * scale).unwrap(), &b1, &moved);
        match (h0, h1) {
            (Some(a), Some(b)) => assert!((b.t - scale * a.t).abs() < 1e-9 * (1.0 + b.t)),
            (None, None) => {}
            other => panic!("hit disagreement {other:?}"),
        }
    }
}

#[test]
fn grazing_and_parallel_rays() {
    let plane = TriangleMesh::ground_plane(5.0, 0.0, 1).unwrap();
    let bvh = Bvh::build(&plane).unwrap();
    let parallel = Ray::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.0), 50.0).unwrap();
    assert!(intersect(&parallel, &bvh, &plane).is_none());
    let in_plane = Ray::new(Vec3::new(-10.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), 50.0).unwrap();
    assert!(intersect(&in_plane, &bvh, &plane).is_none());
    let mut r = rng(7);
    for _ in 0..200 {
        let x = r.random_range(-5.0..5.0);
        let y = r.random_range(-5.0..5.0);
        let down = Ray::new(Vec3::new(x, y, 3.0), Vec3::new(0.0, 0.0, -1.0), 10.0).unwrap();
        let hit = intersect(&down, &bvh, &plane).expect("vertical ray inside the square hits");
        assert!((hit.t - 3.0).abs() < 1e-12);
    }
}
