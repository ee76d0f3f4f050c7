#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dtsim_core::geometry::obj::write_obj;
use dtsim_core::{SemanticPalette, TriangleMesh, Vec3};
use serde_json::{json, Value};

pub fn dtsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtsim")).args(args).output().expect("binary runs")
}

pub fn dtsim_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtsim")).current_dir(dir).args(args).output().expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

/// Ground plane plus static boxes `(center xy, dims, yaw)`.
pub fn street_mesh(boxes: &[([f64; 2], [f64; 3], f64)]) -> TriangleMesh {
    let mut parts = vec![TriangleMesh::ground_plane(80.0, 0.0, dtsim_core::palette::ROAD).unwrap()];
    for &(c, d, yaw) in boxes {
        let center = Vec3::new(c[0], c[1], d[2] / 2.0);
        parts.push(TriangleMesh::oriented_box(center, Vec3::new(d[0], d[1], d[2]), yaw, 0).unwrap());
    }
    let refs: Vec<&TriangleMesh> = parts.iter().collect();
    TriangleMesh::merge(&refs)
}

pub fn write_mesh(path: &Path, mesh: &TriangleMesh) {
    std::fs::write(path, write_obj(mesh, &SemanticPalette::default())).unwrap();
}

pub fn square(id: &str, cx: f64, cy: f64, half: f64, speed_limit: f64) -> Value {
    let w = |x: f64, y: f64| json!([cx + x, cy + y, 0.0]);
    json!({
        "id": id,
        "waypoints": [w(-half, -half), w(half, -half), w(half, half), w(-half, half), w(-half, -half)],
        "speed_limit": speed_limit
    })
}

pub fn sensor(name: &str, position: [f64; 3]) -> Value {
    json!({
        "name": name,
        "spec": {
            "channels": 16, "horizontal_resolution": 1.0, "h_fov": [0, 360], "v_fov": [-25, 5],
            "range_max": 60, "point_rate": 100000, "rotation_rate": 10,
            "noise_sigma": 0.02, "dropout_prob": 0.02
        },
        "pose": {"position": position}
    })
}

pub fn catalog() -> Value {
    json!([
        {"class": "car", "dx": 4.5, "dy": 1.9, "dz": 1.5, "cruise_speed": 8},
        {"class": "truck", "dx": 8.0, "dy": 2.5, "dz": 3.2, "cruise_speed": 6},
        {"class": "bus", "dx": 11.0, "dy": 2.6, "dz": 3.2, "cruise_speed": 7}
    ])
}

/// Scene config with a ring road around the origin.
pub fn scene_config(mesh: &str, weights: Value, actors: usize, seed: u64, frames: u64) -> Value {
    json!({
        "mesh": {"path": mesh},
        "sensors": [sensor("roof", [0.0, 0.0, 2.0])],
        "paths": [square("ring", 0.0, 0.0, 20.0, 10.0)],
        "spawn_points": (0..8).map(|i| json!({"path_id": "ring", "arc_offset": i as f64 * 20.0})).collect::<Vec<_>>(),
        "distribution": {"actors": actors, "weights": weights},
        "catalog": catalog(),
        "signals": [{"path_id": "ring", "stop_arc": 40, "green": 6, "red": 4}],
        "seed": seed,
        "frames": frames
    })
}

pub fn write_json(path: &Path, value: &Value) -> PathBuf {
    std::fs::write(path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
    path.to_path_buf()
}

/// Every file under `dir`, relative path to bytes, sorted.
pub fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
