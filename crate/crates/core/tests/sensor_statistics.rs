mod common;

use common::*;
use dtsim_core::geometry::point_to_mesh_distance;
use dtsim_core::sensor::{
    build_scan_pattern, scan_frame, RawFrame, RigidTransform, SceneObject, SceneSnapshot, SensorPose, SensorSpec,
};
use dtsim_core::{Bvh, TriangleMesh, Vec3};
use rand::Rng;

fn spec(noise_sigma: f64, dropout_prob: f64) -> SensorSpec {
    SensorSpec {
        channels: 64,
        horizontal_resolution: 0.2,
        h_fov: [0.0, 360.0],
        v_fov: [-30.0, -5.0],
        range_max: 100.0,
        point_rate: 1e9,
        rotation_rate: 10.0,
        noise_sigma,
        dropout_prob,
    }
}

fn plane_scene() -> SceneSnapshot {
    let plane = TriangleMesh::ground_plane(200.0, 0.0, 1).unwrap();
    SceneSnapshot { frame: 3, time: 0.3, objects: vec![SceneObject::new(plane, 0).unwrap()] }
}

fn scan(spec: &SensorSpec, pose: &SensorPose, scene: &SceneSnapshot, seed: u64) -> RawFrame {
    let pattern = build_scan_pattern(spec).unwrap();
    scan_frame(spec, &pattern, pose, scene, seed, 0)
}

fn pose() -> SensorPose {
    SensorPose { position: Vec3::new(0.0, 0.0, 2.0), ..Default::default() }
}

#[test]
fn range_noise_sigma_within_five_percent() {
    let sigma = 0.03;
    let s = spec(sigma, 0.0);
    let frame = scan(&s, &pose(), &plane_scene(), 11);
    assert_eq!(frame.points.len(), s.rays_per_sweep());
    assert!(frame.points.len() >= 100_000);
    let errors: Vec<f64> = frame.points.iter().map(|p| p.range - p.true_range).collect();
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let sd = (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((sd / sigma - 1.0).abs() < 0.05, "sample sigma {sd}");
    assert!(mean.abs() < 5.0 * sigma / n.sqrt());
}

#[test]
fn dropout_fraction_within_two_percent() {
    for p in [0.05, 0.3, 0.7] {
        let s = spec(0.0, p);
        let frame = scan(&s, &pose(), &plane_scene(), 12);
        assert!(frame.candidate_returns >= 100_000);
        let dropped = 1.0 - frame.points.len() as f64 / frame.candidate_returns as f64;
        assert!((dropped - p).abs() < 0.02, "p={p} observed {dropped}");
    }
}

#[test]
fn noiseless_returns_lie_on_the_mesh() {
    let mut r = rng(20);
    let mut parts = vec![TriangleMesh::ground_plane(60.0, 0.0, 1).unwrap()];
    for _ in 0..6 {
        let c = Vec3::new(r.random_range(-20.0..20.0), r.random_range(-20.0..20.0), 1.0);
        parts.push(TriangleMesh::oriented_box(c, Vec3::new(4.0, 2.0, 2.0), r.random_range(0.0..3.0), 2).unwrap());
    }
    let refs: Vec<&TriangleMesh> = parts.iter().collect();
    let mesh = TriangleMesh::merge(&refs);
    let bvh = Bvh::build(&mesh).unwrap();
    let scene = SceneSnapshot { frame: 0, time: 0.0, objects: vec![SceneObject::new(mesh.clone(), 0).unwrap()] };
    let mut s = spec(0.0, 0.0);
    s.v_fov = [-25.0, 5.0];
    let frame = scan(&s, &pose(), &scene, 1);
    assert!(frame.points.len() > 50_000);
    for p in &frame.points {
        assert!(point_to_mesh_distance(p.position, &bvh, &mesh).unwrap() < 1e-6);
        assert_eq!(p.range, p.true_range);
        assert!((0.0..=1.0).contains(&p.intensity));
    }
}

#[test]
fn point_count_bounded_by_pattern() {
    let mut s = spec(0.01, 0.0);
    s.v_fov = [-10.0, 10.0];
    let frame = scan(&s, &pose(), &plane_scene(), 2);
    assert!(frame.points.len() < s.rays_per_sweep(), "upward rays miss the ground");
    assert_eq!(frame.points.len(), frame.candidate_returns);
}

#[test]
fn frames_are_reproducible() {
    let s = spec(0.02, 0.999);
    let a = scan(&s, &pose(), &plane_scene(), 99);
    let b = scan(&s, &pose(), &plane_scene(), 99);
    assert_eq!(a, b);
    let c = scan(&s, &pose(), &plane_scene(), 100);
    assert_ne!(a.points, c.points);
}

#[test]
fn pose_equivariance() {
    let mut r = rng(21);
    let mut parts = vec![TriangleMesh::ground_plane(80.0, 0.0, 1).unwrap()];
    for _ in 0..5 {
        let c = Vec3::new(r.random_range(-15.0..15.0), r.random_range(-15.0..15.0), 1.0);
        parts.push(TriangleMesh::oriented_box(c, Vec3::new(4.0, 2.0, 2.0), r.random_range(0.0..3.0), 2).unwrap());
    }
    let refs: Vec<&TriangleMesh> = parts.iter().collect();
    let mesh = TriangleMesh::merge(&refs);
    let mut s = spec(0.02, 0.1);
    s.channels = 16;
    s.horizontal_resolution = 1.0;
    let base_pose = SensorPose { position: Vec3::new(1.0, -2.0, 2.0), yaw: 10.0, pitch: 3.0, roll: -2.0 };
    let scene = SceneSnapshot { frame: 0, time: 0.0, objects: vec![SceneObject::new(mesh.clone(), 0).unwrap()] };
    let before = scan(&s, &base_pose, &scene, 5);

    let g = RigidTransform::from_yaw_pitch_roll(Vec3::new(40.0, -13.0, 5.0), 0.9, 0.0, 0.0);
    let moved_mesh = g.apply_to_mesh(&mesh).unwrap();
    let moved_pose = SensorPose {
        position: g.apply(base_pose.position),
        yaw: base_pose.yaw + 0.9f64.to_degrees(),
        ..base_pose
    };
    let moved_scene = SceneSnapshot { frame: 0, time: 0.0, objects: vec![SceneObject::new(moved_mesh, 0).unwrap()] };
    let after = scan(&s, &moved_pose, &moved_scene, 5);

    assert_eq!(before.points.len(), after.points.len());
    assert!(before.points.len() > 1000);
    for (a, b) in before.points.iter().zip(&after.points) {
        assert_eq!(a.ray_index, b.ray_index);
        assert!((a.range - b.range).abs() < 1e-6);
        assert!((a.intensity - b.intensity).abs() < 1e-6);
        assert!(g.apply(a.position).distance(b.position) < 1e-6);
    }
}
