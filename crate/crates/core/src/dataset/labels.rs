use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::geometry::Vec3;
use crate::palette::SemanticPalette;
use crate::scenario::{Scenario, WorldState};
use crate::sensor::RawFrame;

/// Oriented 3D box in the sensor frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub class: String,
    pub center: [f32; 3],
    /// length, width, height
    pub dims: [f32; 3],
    /// radians about the sensor z axis
    pub yaw: f32,
    pub track_id: u32,
    pub num_points: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrame {
    pub frame: u64,
    pub time: f64,
    /// (x, y, z, intensity) in the sensor frame
    pub points: Vec<[f32; 4]>,
    pub semantic: Vec<u32>,
    pub instance: Vec<u32>,
    pub boxes: Vec<Box3D>,
}

impl LabeledFrame {
    pub fn empty(frame: u64, time: f64) -> Self {
        LabeledFrame { frame, time, points: Vec::new(), semantic: Vec::new(), instance: Vec::new(), boxes: Vec::new() }
    }

    pub fn xyz(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.points.iter().map(|p| Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64))
    }

    /// Bit-level equality, so `-0.0`/`0.0` and NaN payloads are told apart.
    pub fn bit_eq(&self, other: &LabeledFrame) -> bool {
        let pts = |f: &LabeledFrame| f.points.iter().flat_map(|p| p.map(f32::to_bits)).collect::<Vec<_>>();
        let bx = |f: &LabeledFrame| {
            f.boxes
                .iter()
                .map(|b| (b.class.clone(), b.center.map(f32::to_bits), b.dims.map(f32::to_bits), b.yaw.to_bits(), b.track_id, b.num_points))
                .collect::<Vec<_>>()
        };
        self.frame == other.frame
            && self.time.to_bits() == other.time.to_bits()
            && pts(self) == pts(other)
            && self.semantic == other.semantic
            && self.instance == other.instance
            && bx(self) == bx(other)
    }
}

/// Containment in a box rotated by `yaw` about z, inclusive with `tolerance`.
pub fn point_in_box(p: Vec3, center: Vec3, dims: Vec3, yaw: f64, tolerance: f64) -> bool {
    let d = p - center;
    let (s, c) = yaw.sin_cos();
    let local = Vec3::new(c * d.x + s * d.y, -s * d.x + c * d.y, d.z);
    local.x.abs() <= dims.x / 2.0 + tolerance
        && local.y.abs() <= dims.y / 2.0 + tolerance
        && local.z.abs() <= dims.z / 2.0 + tolerance
}

/// Moves a raw sweep into the sensor frame and attaches labels: semantic id
/// from the hit triangle, instance id = track id for actor hits, and one box
/// per live actor whether or not any point reached it.
pub fn label_frame(
    raw: &RawFrame,
    world: &WorldState,
    scenario: &Scenario,
    palette: &SemanticPalette,
) -> Result<LabeledFrame, DatasetError> {
    if raw.time.to_bits() != world.time.to_bits() {
        return Err(DatasetError::SnapshotMismatch { frame_time: raw.time, actor_time: world.time });
    }
    let to_world = raw.pose.transform();
    let mut points = Vec::with_capacity(raw.points.len());
    let mut semantic = Vec::with_capacity(raw.points.len());
    let mut instance = Vec::with_capacity(raw.points.len());
    for p in &raw.points {
        let local = to_world.apply_inverse(p.position);
        points.push([local.x as f32, local.y as f32, local.z as f32, p.intensity as f32]);
        semantic.push(p.semantic);
        instance.push(p.object_id);
    }

    let mut boxes = Vec::with_capacity(world.actors.len());
    for actor in &world.actors {
        let class = scenario
            .class(&actor.class)
            .filter(|_| palette.id(&actor.class).is_some())
            .ok_or_else(|| DatasetError::UnknownActorClass { track_id: actor.track_id, class: actor.class.clone() })?;
        let center_world = actor.position + Vec3::new(0.0, 0.0, class.dz / 2.0);
        let c = to_world.apply_inverse(center_world);
        let heading = to_world.rotate_inverse(Vec3::new(actor.heading.cos(), actor.heading.sin(), 0.0));
        let num_points = instance.iter().filter(|&&id| id == actor.track_id).count() as u32;
        boxes.push(Box3D {
            class: actor.class.clone(),
            center: [c.x as f32, c.y as f32, c.z as f32],
            dims: [class.dx as f32, class.dy as f32, class.dz as f32],
            yaw: heading.y.atan2(heading.x) as f32,
            track_id: actor.track_id,
            num_points,
        });
    }
    Ok(LabeledFrame { frame: raw.frame, time: raw.time, points, semantic, instance, boxes })
}
