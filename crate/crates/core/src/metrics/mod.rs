//! Synthetic-vs-reference fidelity metrics.
//!
//! * P95 Hausdorff: 95th percentile (nearest rank) of the pooled
//!   bidirectional nearest-neighbour distance multiset.
//! * JS divergence: base-2 Jensen–Shannon divergence between the voxel
//!   occupancy distributions of two clouds on a shared grid.
//! * P2M: mean point-to-mesh distance.

mod kdtree;
mod report;

pub use kdtree::KdTree;
pub use report::{
    aggregate, emit_histograms, histogram_csv, percent_reduction, EvaluationReport, FidelityReport, MetricDistributions,
    MetricMeans, PairMetrics, Reductions, HISTOGRAM_BINS,
};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Bvh, GeometryError, TriangleMesh, Vec3};

pub const DEFAULT_VOXEL_SIZE: f64 = 0.5;
pub const PERCENTILE: u64 = 95;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("voxel size must be positive and finite, got {0}")]
    InvalidVoxelSize(f64),
    #[error("no evaluation pairs given")]
    NoPairs,
    #[error("baseline mean for {0} is zero; percent reduction undefined")]
    DegenerateBaseline(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<u64>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        PointCloud { points, frame: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Nearest-rank percentile of an ascending slice: the value at 1-based rank
/// `ceil(pct/100 · n)`.
pub fn nearest_rank(sorted: &[f64], pct: u64) -> f64 {
    assert!(!sorted.is_empty());
    let n = sorted.len() as u64;
    let rank = (pct * n).div_ceil(100).clamp(1, n);
    sorted[(rank - 1) as usize]
}

/// Distance from each point of `from` to its nearest neighbour in `to`.
pub fn directed_distances(from: &PointCloud, to: &KdTree) -> Vec<f64> {
    from.points.par_iter().map(|&p| to.nearest_distance(p)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HausdorffResult {
    pub p95: f64,
    /// classic (max) Hausdorff distance
    pub max: f64,
    /// pooled D_AB ∪ D_BA, ascending
    pub distances: Vec<f64>,
}

pub fn hausdorff(a: &PointCloud, b: &PointCloud) -> Result<HausdorffResult, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    let (ta, tb) = rayon::join(|| KdTree::build(&a.points), || KdTree::build(&b.points));
    let mut distances = directed_distances(a, &tb);
    distances.extend(directed_distances(b, &ta));
    distances.sort_unstable_by(f64::total_cmp);
    Ok(HausdorffResult {
        p95: nearest_rank(&distances, PERCENTILE),
        max: *distances.last().expect("non-empty"),
        distances,
    })
}

pub fn hausdorff_p95(a: &PointCloud, b: &PointCloud) -> Result<f64, MetricsError> {
    hausdorff(a, b).map(|h| h.p95)
}

/// Sparse occupancy counts on a cubic grid. Cell `(i,j,k)` covers
/// `origin + voxel_size·[i,i+1) × [j,j+1) × [k,k+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelHistogram {
    pub origin: Vec3,
    pub voxel_size: f64,
    pub counts: BTreeMap<(i64, i64, i64), u64>,
    pub total: u64,
}

/// Grid index of `p` on the lattice through the world origin.
#[inline]
fn lattice_cell(p: Vec3, voxel: f64) -> (i64, i64, i64) {
    ((p.x / voxel).floor() as i64, (p.y / voxel).floor() as i64, (p.z / voxel).floor() as i64)
}

impl VoxelHistogram {
    /// Voxelizes `cloud` on the grid whose origin is the lattice corner at or
    /// below `anchor`.
    pub fn build(cloud: &PointCloud, anchor: Vec3, voxel_size: f64) -> Result<Self, MetricsError> {
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(MetricsError::InvalidVoxelSize(voxel_size));
        }
        let base = lattice_cell(anchor, voxel_size);
        let origin = Vec3::new(base.0 as f64, base.1 as f64, base.2 as f64) * voxel_size;
        let mut counts = BTreeMap::new();
        for &p in &cloud.points {
            let c = lattice_cell(p, voxel_size);
            *counts.entry((c.0 - base.0, c.1 - base.1, c.2 - base.2)).or_insert(0u64) += 1;
        }
        Ok(VoxelHistogram { origin, voxel_size, counts, total: cloud.len() as u64 })
    }

    pub fn probability(&self, cell: &(i64, i64, i64)) -> f64 {
        self.counts.get(cell).map_or(0.0, |&c| c as f64 / self.total as f64)
    }
}

/// Base-2 JSD of two histograms on the same grid.
pub fn jsd_of_histograms(p: &VoxelHistogram, q: &VoxelHistogram) -> f64 {
    let mut kl_p = 0.0;
    let mut kl_q = 0.0;
    let cells = p.counts.keys().chain(q.counts.keys().filter(|k| !p.counts.contains_key(k)));
    let mut cells: Vec<_> = cells.collect();
    cells.sort_unstable();
    for cell in cells {
        let (pp, qq) = (p.probability(cell), q.probability(cell));
        let m = 0.5 * (pp + qq);
        if pp > 0.0 {
            kl_p += pp * (pp / m).log2();
        }
        if qq > 0.0 {
            kl_q += qq * (qq / m).log2();
        }
    }
    (0.5 * kl_p + 0.5 * kl_q).clamp(0.0, 1.0)
}

pub fn js_divergence(a: &PointCloud, b: &PointCloud, voxel_size: f64) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    let anchor = a.points.iter().chain(&b.points).fold(Vec3::splat(f64::INFINITY), |m, &p| m.min(p));
    let p = VoxelHistogram::build(a, anchor, voxel_size)?;
    let q = VoxelHistogram::build(b, anchor, voxel_size)?;
    Ok(jsd_of_histograms(&p, &q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct P2mResult {
    pub mean: f64,
    /// per-point distances, cloud order
    pub distances: Vec<f64>,
}

pub fn p2m(cloud: &PointCloud, bvh: &Bvh, mesh: &TriangleMesh) -> Result<P2mResult, MetricsError> {
    if cloud.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    if mesh.is_empty() {
        return Err(GeometryError::EmptyMesh.into());
    }
    let distances: Vec<f64> = cloud
        .points
        .par_iter()
        .map(|&p| crate::geometry::point_to_mesh_distance(p, bvh, mesh))
        .collect::<Result<_, _>>()?;
    let mean = distances.iter().sum::<f64>() / distances.len() as f64;
    Ok(P2mResult { mean, distances })
}

pub fn p2m_mean(cloud: &PointCloud, bvh: &Bvh, mesh: &TriangleMesh) -> Result<f64, MetricsError> {
    p2m(cloud, bvh, mesh).map(|r| r.mean)
}
