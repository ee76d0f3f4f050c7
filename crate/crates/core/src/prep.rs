//! Scene mesh cleanup: crop to a region of interest, drop small disconnected
//! pieces (reconstruction blobs, floating shards) and rescale to meters.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, TriangleMesh, Vec3};

/// Default area threshold (m²) below which a disconnected component is removed.
pub const DEFAULT_MIN_COMPONENT_AREA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrepError {
    #[error("no triangle centroid lies inside ROI {0}")]
    EmptyResult(RoiBox),
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("ROI min must be below max on every axis: {0}")]
    InvalidRoi(RoiBox),
    #[error("minimum component area must be >= 0, got {0}")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiBox {
    pub min: Vec3,
    pub max: Vec3,
}

impl RoiBox {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self, PrepError> {
        let roi = RoiBox { min, max };
        roi.validate()?;
        Ok(roi)
    }

    pub fn validate(&self) -> Result<(), PrepError> {
        let ok = self.min.is_finite()
            && self.max.is_finite()
            && self.min.x < self.max.x
            && self.min.y < self.max.y
            && self.min.z < self.max.z;
        if ok {
            Ok(())
        } else {
            Err(PrepError::InvalidRoi(*self))
        }
    }

    /// Closed-box containment.
    pub fn contains(&self, p: Vec3) -> bool {
        (self.min.x..=self.max.x).contains(&p.x)
            && (self.min.y..=self.max.y).contains(&p.y)
            && (self.min.z..=self.max.z).contains(&p.z)
    }
}

impl std::fmt::Display for RoiBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{},{},{} .. {},{},{}]",
            self.min.x, self.min.y, self.min.z, self.max.x, self.max.y, self.max.z
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepConfig {
    #[serde(default)]
    pub roi: Option<RoiBox>,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "default_min_area")]
    pub min_component_area: f64,
}

fn one() -> f64 {
    1.0
}

fn default_min_area() -> f64 {
    DEFAULT_MIN_COMPONENT_AREA
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig { roi: None, scale: 1.0, min_component_area: DEFAULT_MIN_COMPONENT_AREA }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrepSummary {
    pub triangles_before: usize,
    pub triangles_after: usize,
    pub components_removed: usize,
}

impl std::fmt::Display for PrepSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "triangles: {}→{}, components removed: {}",
            self.triangles_before, self.triangles_after, self.components_removed
        )
    }
}

/// Keeps triangles whose centroid lies in the closed ROI box.
pub fn crop_to_roi(mesh: &TriangleMesh, roi: &RoiBox) -> Result<TriangleMesh, PrepError> {
    roi.validate()?;
    let keep: Vec<usize> = (0..mesh.len()).filter(|&t| roi.contains(mesh.centroid(t))).collect();
    if keep.is_empty() {
        return Err(PrepError::EmptyResult(*roi));
    }
    Ok(mesh.subset(&keep))
}

/// Connected components under shared-edge adjacency, as lists of triangle
/// indices. Components are ordered by their lowest triangle index.
pub fn connected_components(mesh: &TriangleMesh) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..mesh.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut edge_owner: HashMap<(u32, u32), usize> = HashMap::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            match edge_owner.get(&key) {
                Some(&other) => {
                    let (ra, rb) = (find(&mut parent, t), find(&mut parent, other));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
                None => {
                    edge_owner.insert(key, t);
                }
            }
        }
    }
    let mut slot_of_root: HashMap<usize, usize> = HashMap::new();
    let mut components: Vec<Vec<usize>> = Vec::new();
    for t in 0..mesh.len() {
        let root = find(&mut parent, t);
        let slot = *slot_of_root.entry(root).or_insert_with(|| {
            components.push(Vec::new());
            components.len() - 1
        });
        components[slot].push(t);
    }
    components
}

/// Deletes components whose total area is below `min_component_area`. The
/// largest component survives regardless. Returns the cleaned mesh and the
/// number of components removed.
pub fn remove_floating_components(
    mesh: &TriangleMesh,
    min_component_area: f64,
) -> Result<(TriangleMesh, usize), PrepError> {
    if !(min_component_area >= 0.0) {
        return Err(PrepError::InvalidThreshold(min_component_area));
    }
    if mesh.is_empty() {
        return Ok((mesh.clone(), 0));
    }
    let components = connected_components(mesh);
    let areas: Vec<f64> = components
        .iter()
        .map(|c| c.iter().map(|&t| mesh.triangle_area(t)).sum())
        .collect();
    let largest = areas
        .iter()
        .enumerate()
        .fold(0, |best, (i, &a)| if a > areas[best] { i } else { best });

    let mut keep = Vec::with_capacity(mesh.len());
    let mut removed = 0;
    for (i, comp) in components.iter().enumerate() {
        if i == largest || areas[i] >= min_component_area {
            keep.extend_from_slice(comp);
        } else {
            removed += 1;
        }
    }
    if removed == 0 {
        return Ok((mesh.clone(), 0));
    }
    keep.sort_unstable();
    Ok((mesh.subset(&keep), removed))
}

/// Multiplies every vertex by `scale`.
pub fn rescale(mesh: &TriangleMesh, scale: f64) -> Result<TriangleMesh, PrepError> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(PrepError::InvalidScale(scale));
    }
    if scale == 1.0 {
        return Ok(mesh.clone());
    }
    let vertices = mesh.vertices().iter().map(|&v| v * scale).collect();
    Ok(TriangleMesh::new(vertices, mesh.triangles().to_vec(), mesh.semantic().to_vec())?)
}

/// Crop (when an ROI is given), remove floating components, then rescale.
/// The ROI and area threshold are in the input mesh's units.
pub fn prepare(mesh: &TriangleMesh, config: &PrepConfig) -> Result<(TriangleMesh, PrepSummary), PrepError> {
    let cropped = match &config.roi {
        Some(roi) => crop_to_roi(mesh, roi)?,
        None => mesh.clone(),
    };
    let (cleaned, components_removed) = remove_floating_components(&cropped, config.min_component_area)?;
    let scaled = rescale(&cleaned, config.scale)?;
    let summary = PrepSummary {
        triangles_before: mesh.len(),
        triangles_after: scaled.len(),
        components_removed,
    };
    Ok((scaled, summary))
}
