//! Parametric spinning LiDAR.
//!
//! A [`SensorSpec`] fixes the scan pattern: `channels` beams spread evenly
//! over the vertical field of view, swept across the horizontal field of view
//! in steps of `horizontal_resolution`. One frame is one sweep. Each ray
//! reports the nearest surface within `range_max`; returns are perturbed by
//! Gaussian range noise and dropped at random with `dropout_prob`, both drawn
//! from a per-ray stream so the result does not depend on thread count.
//!
//! Sensor frame: +x forward, +y left, +z up. Pose angles are degrees, applied
//! yaw (about z), then pitch (about the new y), then roll (about the new x).
//! Positive pitch tilts the forward axis down.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Bvh, GeometryError, Ray, TriangleMesh, Vec3};
use crate::rng::ray_stream;

/// Simulator length units per meter.
pub const UNITS_PER_METER: f64 = 100.0;

pub fn units_to_meters(units: f64) -> f64 {
    units / UNITS_PER_METER
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensorError {
    #[error("invalid sensor spec: {0}")]
    InvalidSpec(String),
    #[error("sensor spec inconsistent: {rays_per_second} rays/s exceeds point rate {point_rate}")]
    SpecInconsistent { rays_per_second: f64, point_rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub channels: u32,
    /// degrees per azimuth step
    pub horizontal_resolution: f64,
    /// [start, end) in degrees
    pub h_fov: [f64; 2],
    /// [min, max] in degrees, inclusive
    pub v_fov: [f64; 2],
    pub range_max: f64,
    /// points per second
    pub point_rate: f64,
    /// sweeps per second
    pub rotation_rate: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub dropout_prob: f64,
}

impl SensorSpec {
    pub fn h_span(&self) -> f64 {
        self.h_fov[1] - self.h_fov[0]
    }

    /// Azimuth steps in one sweep.
    pub fn azimuth_steps(&self) -> usize {
        // tolerate representation error, e.g. 360 / 0.2
        (self.h_span() / self.horizontal_resolution + 1e-9).floor() as usize
    }

    pub fn rays_per_sweep(&self) -> usize {
        self.channels as usize * self.azimuth_steps()
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        let bad = |m: &str| Err(SensorError::InvalidSpec(m.to_string()));
        if self.channels < 1 {
            return bad("channels must be >= 1");
        }
        if !(self.horizontal_resolution > 0.0 && self.horizontal_resolution <= 360.0) {
            return bad("horizontal_resolution must be in (0, 360]");
        }
        let span = self.h_span();
        if !(span > 0.0 && span <= 360.0) || !self.h_fov.iter().all(|a| a.is_finite()) {
            return bad("h_fov span must be in (0, 360]");
        }
        if self.azimuth_steps() == 0 {
            return bad("h_fov span is smaller than one azimuth step");
        }
        let [lo, hi] = self.v_fov;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= -90.0 && hi <= 90.0) {
            return bad("v_fov must satisfy -90 <= min <= max <= 90");
        }
        if self.channels > 1 && lo >= hi {
            return bad("v_fov min must be below max when channels > 1");
        }
        if !(self.range_max > 0.0 && self.range_max.is_finite()) {
            return bad("range_max must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be >= 0");
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return bad("dropout_prob must be in [0, 1)");
        }
        if !(self.rotation_rate > 0.0 && self.rotation_rate.is_finite()) {
            return bad("rotation_rate must be positive");
        }
        if !(self.point_rate > 0.0) {
            return bad("point_rate must be positive");
        }
        let rays_per_second = self.channels as f64 * (span / self.horizontal_resolution) * self.rotation_rate;
        if rays_per_second > self.point_rate * (1.0 + 1e-9) {
            return Err(SensorError::SpecInconsistent { rays_per_second, point_rate: self.point_rate });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorPose {
    pub position: Vec3,
    /// degrees
    #[serde(default)]
    pub yaw: f64,
    /// degrees; tilt about the sensor's lateral axis
    #[serde(default)]
    pub pitch: f64,
    /// degrees
    #[serde(default)]
    pub roll: f64,
}

impl SensorPose {
    pub fn transform(&self) -> RigidTransform {
        RigidTransform::from_yaw_pitch_roll(self.position, self.yaw.to_radians(), self.pitch.to_radians(), self.roll.to_radians())
    }
}

/// `p_world = rotation · p_local + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    /// row-major
    pub rotation: [[f64; 3]; 3],
    pub translation: Vec3,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        translation: Vec3::ZERO,
    };

    /// Rz(yaw) · Ry(pitch) · Rx(roll); positive pitch points +x downward.
    pub fn from_yaw_pitch_roll(translation: Vec3, yaw: f64, pitch: f64, roll: f64) -> Self {
        let (sy, cy) = yaw.sin_cos();
        let (sp, cp) = pitch.sin_cos();
        let (sr, cr) = roll.sin_cos();
        let rotation = [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ];
        RigidTransform { rotation, translation }
    }

    #[inline]
    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let r = &self.rotation;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    #[inline]
    pub fn rotate_inverse(&self, v: Vec3) -> Vec3 {
        let r = &self.rotation;
        Vec3::new(
            r[0][0] * v.x + r[1][0] * v.y + r[2][0] * v.z,
            r[0][1] * v.x + r[1][1] * v.y + r[2][1] * v.z,
            r[0][2] * v.x + r[1][2] * v.y + r[2][2] * v.z,
        )
    }

    #[inline]
    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotate(p) + self.translation
    }

    #[inline]
    pub fn apply_inverse(&self, p: Vec3) -> Vec3 {
        self.rotate_inverse(p - self.translation)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let mut rotation = [[0.0; 3]; 3];
        for (i, row) in rotation.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.rotation[i][k] * other.rotation[k][j]).sum();
            }
        }
        RigidTransform { rotation, translation: self.apply(other.translation) }
    }

    pub fn apply_to_mesh(&self, mesh: &TriangleMesh) -> Result<TriangleMesh, GeometryError> {
        let vertices = mesh.vertices().iter().map(|&v| self.apply(v)).collect();
        TriangleMesh::new(vertices, mesh.triangles().to_vec(), mesh.semantic().to_vec())
    }
}

/// Beam directions for one sweep, azimuth-major then channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPattern {
    channels: usize,
    /// (azimuth°, elevation°)
    angles: Vec<(f64, f64)>,
    directions: Vec<Vec3>,
}

impl ScanPattern {
    pub fn angles(&self) -> &[(f64, f64)] {
        &self.angles
    }

    /// Unit directions in the sensor frame.
    pub fn directions(&self) -> &[Vec3] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }
}

/// Channel elevations: inclusive linspace over `v_fov`; a single channel
/// sits at the middle of the field.
pub fn channel_elevations(spec: &SensorSpec) -> Vec<f64> {
    let [lo, hi] = spec.v_fov;
    let n = spec.channels as usize;
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|c| if c == n - 1 { hi } else { lo + (hi - lo) * c as f64 / (n - 1) as f64 }).collect()
}

pub fn build_scan_pattern(spec: &SensorSpec) -> Result<ScanPattern, SensorError> {
    spec.validate()?;
    let elevations = channel_elevations(spec);
    let steps = spec.azimuth_steps();
    let mut angles = Vec::with_capacity(steps * elevations.len());
    let mut directions = Vec::with_capacity(steps * elevations.len());
    for i in 0..steps {
        let az = spec.h_fov[0] + i as f64 * spec.horizontal_resolution;
        let (sa, ca) = az.to_radians().sin_cos();
        for &el in &elevations {
            let (se, ce) = el.to_radians().sin_cos();
            angles.push((az, el));
            directions.push(Vec3::new(ce * ca, ce * sa, se));
        }
    }
    Ok(ScanPattern { channels: elevations.len(), angles, directions })
}

/// One rigid object in a scene snapshot.
#[derive(Debug, Clone)]
pub struct SceneObject {
    pub mesh: Arc<TriangleMesh>,
    pub bvh: Arc<Bvh>,
    /// 0 for the static scene, the actor's track id otherwise
    pub object_id: u32,
}

impl SceneObject {
    pub fn new(mesh: TriangleMesh, object_id: u32) -> Result<Self, GeometryError> {
        let bvh = Bvh::build(&mesh)?;
        Ok(SceneObject { mesh: Arc::new(mesh), bvh: Arc::new(bvh), object_id })
    }
}

/// Immutable world geometry at one instant.
#[derive(Debug, Clone)]
pub struct SceneSnapshot {
    pub frame: u64,
    pub time: f64,
    pub objects: Vec<SceneObject>,
}

impl SceneSnapshot {
    /// Nearest hit over every object. Ties go to the earlier object.
    pub fn cast(&self, ray: &Ray) -> Option<(crate::geometry::Hit, u32)> {
        let mut best: Option<(crate::geometry::Hit, u32)> = None;
        for obj in &self.objects {
            if let Some(mut hit) = crate::geometry::intersect(ray, &obj.bvh, &obj.mesh) {
                if best.as_ref().is_none_or(|(b, _)| hit.t < b.t) {
                    hit.object_id = obj.object_id;
                    let tag = obj.mesh.semantic()[hit.triangle_index];
                    best = Some((hit, tag));
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPoint {
    /// world frame, after range noise
    pub position: Vec3,
    /// noiseless distance to the surface
    pub true_range: f64,
    /// reported distance
    pub range: f64,
    pub intensity: f64,
    pub semantic: u32,
    pub object_id: u32,
    pub ray_index: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    pub frame: u64,
    pub time: f64,
    pub pose: SensorPose,
    /// rays that hit something within range, before dropout
    pub candidate_returns: usize,
    pub points: Vec<RawPoint>,
}

/// Casts every pattern ray of one sweep against the snapshot.
///
/// `sensor_key` separates the random streams of sensors sharing a seed.
pub fn scan_frame(
    spec: &SensorSpec,
    pattern: &ScanPattern,
    pose: &SensorPose,
    snapshot: &SceneSnapshot,
    seed: u64,
    sensor_key: u64,
) -> RawFrame {
    let to_world = pose.transform();
    let origin = pose.position;
    let results: Vec<(bool, Option<RawPoint>)> = pattern
        .directions()
        .par_iter()
        .enumerate()
        .map(|(i, &local)| {
            let dir = to_world.rotate(local);
            let Ok(ray) = Ray::new(origin, dir, spec.range_max) else { return (false, None) };
            let Some((hit, semantic)) = snapshot.cast(&ray) else { return (false, None) };
            let mut rng = ray_stream(seed, sensor_key, snapshot.frame, i as u64);
            let u: f64 = rng.random();
            let z: f64 = rng.sample(StandardNormal);
            if u < spec.dropout_prob {
                return (true, None);
            }
            let obj = snapshot.objects.iter().find(|o| o.object_id == hit.object_id).expect("hit object exists");
            let [a, b, c] = obj.mesh.triangle(hit.triangle_index);
            let normal = (b - a).cross(c - a).normalized().unwrap_or(Vec3::UNIT_Z);
            let cos_incidence = ray.direction().dot(normal).abs();
            let intensity = (cos_incidence * (1.0 - hit.t / spec.range_max)).clamp(0.0, 1.0);
            let range = (hit.t + spec.noise_sigma * z).max(0.0);
            let position = if spec.noise_sigma == 0.0 { hit.point } else { ray.at(range) };
            let point = RawPoint {
                position,
                true_range: hit.t,
                range,
                intensity,
                semantic,
                object_id: hit.object_id,
                ray_index: i as u32,
            };
            (true, Some(point))
        })
        .collect();
    let candidate_returns = results.iter().filter(|(c, _)| *c).count();
    let points = results.into_iter().filter_map(|(_, p)| p).collect();
    RawFrame { frame: snapshot.frame, time: snapshot.time, pose: *pose, candidate_returns, points }
}
